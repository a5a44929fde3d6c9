//! Experiment configuration files.
//!
//! A configuration is a TOML document with five sections. Every key is
//! optional; missing keys take the defaults of [`ExperimentConfig::default`]:
//!
//! ```toml
//! [graph]
//! topology = "ring"        # or "edge_list" together with `path`
//! n = 20
//! extra_edges = 20
//! seed = 0
//! weights = "random"       # or "uniform"
//!
//! [problem]
//! p = 10
//! rho = 0.1
//! noise = 0.1
//! seed = 0
//!
//! [algorithm]
//! name = ["rcpp"]          # rcpp, pushpull, rcpp_static
//! lambda = 0.02            # one value, or one per agent
//! alpha_x = 0.5
//! alpha_y = 0.5
//! gamma_x = 0.5
//! gamma_y = 0.5
//! c0 = 1.0
//! c = 0.995
//! iterations = 5000        # alias: K
//!
//! [compressor]
//! kind = "qn"              # identity, qn, topk, qtn, uniform
//! b = 2
//!
//! [output]
//! directory = "results"
//! seeds = [0]
//! burn_in = 500
//! target_residual = 1e-8
//! min_r2 = 0.95
//! plateau_residual = 1e-4
//! ```
//!
//! Parsing reports every problem it finds, not just the first.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::algorithm::Algorithm;
use crate::compressors::Compressor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Ring,
    EdgeList,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weights {
    Uniform,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub topology: Topology,
    pub n: usize,
    pub extra_edges: usize,
    pub seed: u64,
    pub weights: Weights,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self {
            topology: Topology::Ring,
            n: 20,
            extra_edges: 20,
            seed: 0,
            weights: Weights::Random,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub p: usize,
    pub rho: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            p: 10,
            rho: 0.1,
            noise: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(v) => vec![v.clone()],
            Self::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmSection {
    pub name: OneOrMany<String>,
    pub lambda: OneOrMany<f64>,
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub c0: f64,
    pub c: f64,
    #[serde(alias = "K")]
    pub iterations: usize,
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        Self {
            name: OneOrMany::Many(vec!["rcpp".into()]),
            lambda: OneOrMany::One(0.02),
            alpha_x: 0.5,
            alpha_y: 0.5,
            gamma_x: 0.5,
            gamma_y: 0.5,
            c0: 1.0,
            c: 0.995,
            iterations: 5000,
        }
    }
}

impl AlgorithmSection {
    pub fn algorithms(&self) -> Vec<Algorithm> {
        self.name
            .to_vec()
            .iter()
            .filter_map(|n| Algorithm::parse(n))
            .collect()
    }

    /// Step sizes expanded to one per agent.
    pub fn step_sizes(&self, agents: usize) -> Vec<f64> {
        match &self.lambda {
            OneOrMany::One(l) => vec![*l; agents],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub seeds: Vec<u64>,
    /// Iterations skipped before fitting the rate.
    pub burn_in: usize,
    pub target_residual: f64,
    pub min_r2: f64,
    /// Final residuals above this are flagged as a plateau.
    pub plateau_residual: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("results"),
            seeds: vec![0],
            burn_in: 500,
            target_residual: 1e-8,
            min_r2: 0.95,
            plateau_residual: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSection,
    pub problem: ProblemSection,
    pub algorithm: AlgorithmSection,
    pub compressor: Compressor,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            graph: GraphSection::default(),
            problem: ProblemSection::default(),
            algorithm: AlgorithmSection::default(),
            compressor: Compressor::Qn { b: 2 },
            output: OutputSection::default(),
        }
    }
}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("graph", &["topology", "n", "extra_edges", "seed", "weights", "path"]),
    ("problem", &["p", "rho", "noise", "seed"]),
    (
        "algorithm",
        &["name", "lambda", "alpha_x", "alpha_y", "gamma_x", "gamma_y", "c0", "c", "iterations", "K"],
    ),
    ("compressor", &["kind", "b", "k", "level"]),
    (
        "output",
        &["directory", "seeds", "burn_in", "target_residual", "min_r2", "plateau_residual"],
    ),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    /// Dotted key path, e.g. `algorithm.gamma_x`.
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{} (line {l}): {}", self.path, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: String,
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} problem(s)", self.source, self.issues.len())?;
        for issue in &self.issues {
            write!(f, "\n  {issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn single(source: &str, path: &str, message: String) -> Self {
        Self {
            source: source.into(),
            issues: vec![ConfigIssue {
                path: path.into(),
                line: None,
                message,
            }],
        }
    }
}

/// Reads, overrides and validates a configuration file.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let source = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::single(&source, "<file>", format!("cannot read: {e}")))?;
    parse_config_str(&text, &source, overrides)
}

/// Same as [`parse_config`] for in-memory text; `source` names it in errors.
pub fn parse_config_str(text: &str, source: &str, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::single(source, "<syntax>", e.to_string().trim().to_string()))?;
    let mut issues = Vec::new();
    for o in overrides {
        if let Err(issue) = apply_override(&mut table, o) {
            issues.push(issue);
        }
    }
    issues.extend(strip_unknown_keys(&mut table, text));

    let defaults = ExperimentConfig::default();
    let mut failed = Vec::new();
    fn load<T: DeserializeOwned>(
        table: &Table,
        name: &'static str,
        text: &str,
        issues: &mut Vec<ConfigIssue>,
        failed: &mut Vec<&'static str>,
        default: T,
    ) -> T {
        let Some(value) = table.get(name) else {
            return default;
        };
        match value.clone().try_into::<T>() {
            Ok(v) => v,
            Err(e) => {
                issues.push(ConfigIssue {
                    path: name.into(),
                    line: section_line(text, name),
                    message: e.to_string().split_whitespace().collect::<Vec<_>>().join(" "),
                });
                failed.push(name);
                default
            }
        }
    }
    let config = ExperimentConfig {
        graph: load(&table, "graph", text, &mut issues, &mut failed, defaults.graph),
        problem: load(&table, "problem", text, &mut issues, &mut failed, defaults.problem),
        algorithm: load(&table, "algorithm", text, &mut issues, &mut failed, defaults.algorithm),
        compressor: load(&table, "compressor", text, &mut issues, &mut failed, defaults.compressor),
        output: load(&table, "output", text, &mut issues, &mut failed, defaults.output),
    };

    // a section that failed to load holds defaults; checking it would only add noise
    for (path, message) in config.constraint_violations() {
        if !failed.iter().any(|f| path.split('.').next() == Some(*f)) {
            issues.push(ConfigIssue {
                line: key_line(text, &path),
                path,
                message,
            });
        }
    }
    if issues.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError {
            source: source.into(),
            issues,
        })
    }
}

/// `section.key=value`; the value is read as a TOML literal, falling back
/// to a bare string.
fn apply_override(table: &mut Table, spec: &str) -> Result<(), ConfigIssue> {
    let issue = |message: String| ConfigIssue {
        path: format!("--set {spec}"),
        line: None,
        message,
    };
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| issue("expected section.key=value".into()))?;
    let (sect, field) = key
        .trim()
        .split_once('.')
        .ok_or_else(|| issue("expected section.key=value".into()))?;
    let value = format!("v = {}", raw.trim())
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_string()));
    let entry = table
        .entry(sect.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    match entry {
        Value::Table(t) => {
            t.insert(field.to_string(), value);
            Ok(())
        }
        _ => Err(issue(format!("{sect} is not a section"))),
    }
}

/// Reports and removes keys that belong to no section.
fn strip_unknown_keys(table: &mut Table, text: &str) -> Vec<ConfigIssue> {
    let mut out = Vec::new();
    table.retain(|name, value| {
        let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| *s == name) else {
            out.push(ConfigIssue {
                path: name.to_string(),
                line: section_line(text, name),
                message: format!("unknown section; expected one of {}", SECTIONS.map(|s| s.0).join(", ")),
            });
            return false;
        };
        let Value::Table(inner) = value else {
            out.push(ConfigIssue {
                path: name.to_string(),
                line: None,
                message: "expected a section".into(),
            });
            return false;
        };
        let keys = match (name, inner.get("kind").and_then(Value::as_str)) {
            ("compressor", Some(kind)) => compressor_keys(kind).unwrap_or(keys),
            _ => keys,
        };
        inner.retain(|key, _| {
            let known = keys.contains(&key);
            if !known {
                let path = format!("{name}.{key}");
                out.push(ConfigIssue {
                    line: key_line(text, &path),
                    path,
                    message: format!("unknown key; expected one of {}", keys.join(", ")),
                });
            }
            known
        });
        true
    });
    out
}

fn compressor_keys(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "identity" => &["kind"],
        "qn" => &["kind", "b"],
        "topk" => &["kind", "k"],
        "qtn" => &["kind", "b", "k"],
        "uniform" => &["kind", "level"],
        _ => return None,
    })
}

fn section_line(text: &str, name: &str) -> Option<usize> {
    let header = format!("[{name}]");
    text.lines().position(|l| l.trim() == header).map(|i| i + 1)
}

/// Line of `key = ...` inside `[section]`, for error context.
fn key_line(text: &str, path: &str) -> Option<usize> {
    let (sect, key) = path.split_once('.')?;
    let key = key.split('.').next()?;
    let start = section_line(text, sect)?;
    text.lines()
        .enumerate()
        .skip(start)
        .take_while(|(_, l)| !l.trim_start().starts_with('['))
        .find(|(_, l)| {
            l.trim_start()
                .strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|(i, _)| i + 1)
}

impl ExperimentConfig {
    /// Canonical TOML rendering; parsing it yields an identical config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Cross-field checks, as `(key path, message)` pairs.
    pub fn constraint_violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut bad = |path: &str, msg: String| out.push((path.to_string(), msg));
        let g = &self.graph;
        if g.n == 0 {
            bad("graph.n", "need at least one agent".into());
        }
        match g.topology {
            Topology::Ring => {
                let free = (g.n * g.n.saturating_sub(1)).saturating_sub(g.n);
                if g.extra_edges > free {
                    bad(
                        "graph.extra_edges",
                        format!("{} chords requested but a ring on {} nodes has {free} free slots", g.extra_edges, g.n),
                    );
                }
            }
            Topology::EdgeList if g.path.is_none() => {
                bad("graph.path", "topology \"edge_list\" needs a path".into());
            }
            Topology::EdgeList => {}
        }

        let p = &self.problem;
        if p.p == 0 {
            bad("problem.p", "dimension must be positive".into());
        }
        if !(p.rho > 0.0 && p.rho.is_finite()) {
            bad("problem.rho", format!("penalty must be positive, got {}", p.rho));
        }
        if !(p.noise >= 0.0 && p.noise.is_finite()) {
            bad("problem.noise", format!("noise must be nonnegative, got {}", p.noise));
        }

        let a = &self.algorithm;
        let names = a.name.to_vec();
        if names.is_empty() {
            bad("algorithm.name", "at least one algorithm is required".into());
        }
        for n in &names {
            if Algorithm::parse(n).is_none() {
                let choices: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                bad("algorithm.name", format!("unknown algorithm {n:?}; expected one of {}", choices.join(", ")));
            }
        }
        if let OneOrMany::Many(v) = &a.lambda {
            if v.len() != g.n {
                bad("algorithm.lambda", format!("{} step sizes for {} agents", v.len(), g.n));
            }
        }
        if a.lambda.to_vec().iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            bad("algorithm.lambda", "step sizes must be positive".into());
        }
        for (key, v) in [("gamma_x", a.gamma_x), ("gamma_y", a.gamma_y)] {
            if !(v > 0.0 && v <= 1.0) {
                bad(
                    &format!("algorithm.{key}"),
                    format!("consensus gain must lie in (0, 1], got {v}"),
                );
            }
        }
        // 1/r is only known once the compressor is certified; r >= 1 for every built-in
        for (key, v) in [("alpha_x", a.alpha_x), ("alpha_y", a.alpha_y)] {
            if !(v > 0.0 && v <= 1.0) {
                bad(
                    &format!("algorithm.{key}"),
                    format!("scaling parameter must lie in (0, 1/r] with r >= 1, got {v}"),
                );
            }
        }
        if !(a.c0 > 0.0 && a.c0.is_finite()) {
            bad("algorithm.c0", format!("initial scale must be positive, got {}", a.c0));
        }
        if !(a.c > 0.0 && a.c <= 1.0) {
            bad("algorithm.c", format!("decay ratio must lie in (0, 1], got {}", a.c));
        }

        if let Err(e) = self.compressor.validate(p.p.max(1)) {
            bad("compressor", e.to_string());
        }

        let o = &self.output;
        if o.seeds.is_empty() {
            bad("output.seeds", "at least one seed is required".into());
        }
        if !(o.target_residual > 0.0 && o.target_residual.is_finite()) {
            bad("output.target_residual", "must be positive".into());
        }
        if !(0.0..=1.0).contains(&o.min_r2) {
            bad("output.min_r2", "must lie in [0, 1]".into());
        }
        if !(o.plateau_residual > 0.0 && o.plateau_residual.is_finite()) {
            bad("output.plateau_residual", "must be positive".into());
        }
        out
    }
}
