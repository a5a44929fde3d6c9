//! Config-driven experiment runs, certification reports and graph files.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::algorithm::{make_schedule, run, Algorithm, RunConfig, Trace};
use crate::compressors::{certify_compressor, CertifyReport, Compressor, CompressorSpec, ScalingSchedule};
use crate::config::{ExperimentConfig, Topology, Weights};
use crate::digraph::{make_ring, Digraph};
use crate::error::{invalid, Error, Result};
use crate::harness::{fit_rate, write_csv, RateFit};
use crate::mixing::{build_mixing, WeightScheme};
use crate::objectives::{RidgeProblem, RidgeSettings};

pub const SUMMARY_HEADER: [&str; 9] = [
    "algorithm",
    "seed",
    "status",
    "iterations",
    "final_residual",
    "c_hat",
    "r2",
    "total_bits",
    "verdict",
];

/// Everything a run needs, built once from a config.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub graph: Digraph,
    pub problem: RidgeProblem,
    pub run_config: RunConfig,
    pub algorithms: Vec<Algorithm>,
    pub warnings: Vec<String>,
}

impl Experiment {
    /// Relative edge-list paths are resolved against `base_dir`.
    pub fn build(config: &ExperimentConfig, base_dir: &Path) -> Result<Self> {
        let violations = config.constraint_violations();
        if !violations.is_empty() {
            let lines: Vec<_> = violations.iter().map(|(k, m)| format!("{k}: {m}")).collect();
            return Err(invalid(lines.join("; ")));
        }
        let graph = load_graph(config, base_dir)?;
        let n = graph.node_count();
        let weights = match config.graph.weights {
            Weights::Uniform => WeightScheme::Uniform,
            Weights::Random => WeightScheme::Perturbed { seed: config.graph.seed },
        };
        let mixing = build_mixing(&graph, &graph, weights)?;
        let pb = &config.problem;
        let problem = RidgeProblem::generate(&RidgeSettings {
            agents: n,
            dim: pb.p,
            rho: pb.rho,
            noise: pb.noise,
            seed: pb.seed,
        })?;
        let compressor = CompressorSpec::new(config.compressor, pb.p, pb.seed)?;
        let alg = &config.algorithm;
        let mut run_config = RunConfig {
            step_sizes: alg.step_sizes(n),
            alpha_x: alg.alpha_x,
            alpha_y: alg.alpha_y,
            gamma_x: alg.gamma_x,
            gamma_y: alg.gamma_y,
            schedule: ScalingSchedule::constant(alg.c0)?,
            iterations: alg.iterations,
            compressor,
            mixing,
        };
        let plan = make_schedule(&run_config.schedule_inputs(), alg.c0, alg.c, None)?;
        run_config.schedule = plan.schedule;
        run_config.validate()?;
        let mut warnings = plan.warnings;
        warnings.extend(run_config.step_size_warnings(problem.smoothness));
        Ok(Self {
            config: config.clone(),
            graph,
            problem,
            run_config,
            algorithms: alg.algorithms(),
            warnings,
        })
    }

    pub fn run_one(&self, algorithm: Algorithm, seed: u64) -> (Trace, Option<Error>) {
        match run(&self.run_config, &self.problem, algorithm, seed) {
            Ok(trace) => (trace, None),
            Err(failure) => {
                let failure = *failure;
                (failure.partial, Some(failure.error))
            }
        }
    }
}

fn load_graph(config: &ExperimentConfig, base_dir: &Path) -> Result<Digraph> {
    let g = &config.graph;
    match g.topology {
        Topology::Ring => make_ring(g.n, g.extra_edges, g.seed),
        Topology::EdgeList => {
            let rel = g.path.as_ref().ok_or_else(|| invalid("edge_list topology needs graph.path"))?;
            let path = base_dir.join(rel);
            let graph = Digraph::parse_edge_list(&fs::read_to_string(&path)?)
                .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            if graph.node_count() != g.n {
                return Err(invalid(format!(
                    "{} has {} nodes but graph.n = {}",
                    path.display(),
                    graph.node_count(),
                    g.n
                )));
            }
            Ok(graph.with_self_loops())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Reached the target residual with a good linear fit.
    Pass,
    /// Final residual above the plateau threshold.
    Plateau,
    Fail,
    Diverged,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Plateau => "plateau",
            Self::Fail => "fail",
            Self::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub seed: u64,
    /// `None` on success, otherwise the error that stopped the run.
    pub failure: Option<String>,
    /// Number of recorded iterates, the initial one included.
    pub records: usize,
    pub final_residual: f64,
    pub fit: Option<RateFit>,
    pub total_bits: u64,
    pub verdict: Verdict,
    pub csv: PathBuf,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub runs: Vec<RunSummary>,
    pub warnings: Vec<String>,
    pub summary_path: PathBuf,
}

impl RunReport {
    pub fn any_diverged(&self) -> bool {
        self.runs.iter().any(|r| r.verdict == Verdict::Diverged)
    }

    /// Human-readable table.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        let _ = writeln!(
            s,
            "{:<12} {:>5} {:>14} {:>10} {:>8} {:>12} {:>9}",
            "algorithm", "seed", "final", "c_hat", "r2", "bits", "verdict"
        );
        for r in &self.runs {
            let (c, r2) = match r.fit {
                Some(f) => (format!("{:.6}", f.c_hat), format!("{:.4}", f.r2)),
                None => ("no fit".into(), "-".into()),
            };
            let _ = writeln!(
                s,
                "{:<12} {:>5} {:>14.6e} {:>10} {:>8} {:>12} {:>9}",
                r.algorithm.name(),
                r.seed,
                r.final_residual,
                c,
                r2,
                r.total_bits,
                r.verdict.name()
            );
            if let Some(f) = &r.failure {
                let _ = writeln!(s, "  {f}");
            }
        }
        s
    }
}

fn verdict(config: &ExperimentConfig, failed: bool, final_residual: f64, fit: Option<RateFit>) -> Verdict {
    let o = &config.output;
    if failed || !final_residual.is_finite() {
        Verdict::Diverged
    } else if final_residual > o.plateau_residual {
        Verdict::Plateau
    } else if final_residual < o.target_residual && fit.is_some_and(|f| f.c_hat < 1.0 && f.r2 >= o.min_r2) {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

pub fn csv_name(algorithm: Algorithm, seed: u64) -> String {
    format!("{}_seed{seed}.csv", algorithm.name())
}

/// Runs every (algorithm, seed) pair on up to `workers` threads, writing
/// one CSV per run, `summary.csv` and the canonical `config.toml` into
/// `out_dir`. Output bytes do not depend on `workers`.
pub fn cmd_run(config: &ExperimentConfig, base_dir: &Path, out_dir: &Path, workers: usize) -> Result<RunReport> {
    let exp = Experiment::build(config, base_dir)?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("config.toml"), config.to_toml())?;

    let jobs: Vec<(Algorithm, u64)> = exp
        .algorithms
        .iter()
        .flat_map(|a| config.output.seeds.iter().map(move |s| (*a, *s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let runs: Vec<RunSummary> = pool.install(|| {
        jobs.par_iter()
            .map(|&(algorithm, seed)| -> Result<RunSummary> {
                let (trace, error) = exp.run_one(algorithm, seed);
                let csv = out_dir.join(csv_name(algorithm, seed));
                write_csv(&trace.records, BufWriter::new(File::create(&csv)?))?;
                let residuals: Vec<f64> = trace.records.iter().map(|r| r.residual).collect();
                let fit = fit_rate(&residuals, config.output.burn_in);
                let final_residual = residuals.last().copied().unwrap_or(f64::NAN);
                Ok(RunSummary {
                    algorithm,
                    seed,
                    failure: error.as_ref().map(ToString::to_string),
                    records: trace.records.len(),
                    final_residual,
                    fit,
                    total_bits: trace.records.last().map_or(0, |r| r.bits_cum),
                    verdict: verdict(config, error.is_some(), final_residual, fit),
                    csv,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let summary_path = out_dir.join("summary.csv");
    write_summary(&runs, &summary_path)?;
    Ok(RunReport {
        runs,
        warnings: exp.warnings,
        summary_path,
    })
}

fn write_summary(runs: &[RunSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in runs {
        let (c, r2) = match r.fit {
            Some(f) => (format!("{:.16e}", f.c_hat), format!("{:.16e}", f.r2)),
            None => ("no fit".into(), "no fit".into()),
        };
        w.write_record([
            r.algorithm.name().to_string(),
            r.seed.to_string(),
            if r.failure.is_some() { "diverged" } else { "completed" }.to_string(),
            r.records.saturating_sub(1).to_string(),
            format!("{:.16e}", r.final_residual),
            c,
            r2,
            r.total_bits.to_string(),
            r.verdict.name().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Certifies `operator` at dimension `dim`. Closed-form operators are
/// checked against their declared constants; `qn` and `qtn` against
/// constants derived from an independent sample.
pub fn cmd_certify(operator: Compressor, dim: usize, samples: usize, seed: u64) -> Result<CertifyReport> {
    let spec = CompressorSpec::new(operator, dim, seed.wrapping_add(1))?;
    certify_compressor(&spec, samples, seed)
}

pub fn render_certify(report: &CertifyReport) -> String {
    let d = &report.declared;
    let e = &report.estimated;
    let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
    let mut s = String::new();
    let _ = writeln!(s, "compressor {} at d = {}, N = {} per scale", report.operator.name(), report.dim, report.samples);
    let _ = writeln!(s, "{:<10} {:>14} {:>14} {:>12}", "constant", "declared", "estimated", "stderr");
    for (name, decl, est, se) in [
        ("C", d.relative, e.relative, e.relative_stderr),
        ("sigma2", d.absolute, e.absolute, e.absolute_stderr),
        ("r", d.scaling, d.scaling, 0.0),
        ("delta", d.contraction, e.contraction, e.contraction_stderr),
        ("sigma_r2", d.scaled_absolute, e.scaled_absolute, e.scaled_absolute_stderr),
    ] {
        let _ = writeln!(s, "{name:<10} {decl:>14.6e} {est:>14.6e} {se:>12.3e}");
    }
    let _ = writeln!(s, "relative bound:    {}", verdict(report.relative_bound_holds));
    let _ = writeln!(s, "contraction bound: {}", verdict(report.contraction_bound_holds));
    let _ = writeln!(s, "overall:           {}", verdict(report.passed()));
    s
}

/// Structural facts about an edge list, for `graph validate`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphReport {
    pub nodes: usize,
    /// Edges excluding self-loops.
    pub edges: usize,
    pub strongly_connected: bool,
    pub roots: Vec<usize>,
    /// Whether the graph (with self-loops) admits a mixing pair when used
    /// for both pulling and pushing.
    pub admits_mixing: bool,
}

impl GraphReport {
    pub fn render(&self) -> String {
        format!(
            "nodes {}\nedges {}\nstrongly connected {}\nroot set {:?}\nadmits mixing {}\n",
            self.nodes, self.edges, self.strongly_connected, self.roots, self.admits_mixing
        )
    }
}

pub fn validate_graph(text: &str) -> Result<GraphReport> {
    let g = Digraph::parse_edge_list(text)?.with_self_loops();
    Ok(GraphReport {
        nodes: g.node_count(),
        edges: g.edges().filter(|(a, b)| a != b).count(),
        strongly_connected: g.is_strongly_connected(),
        roots: g.root_set().into_iter().collect(),
        admits_mixing: build_mixing(&g, &g, WeightScheme::Uniform).is_ok(),
    })
}

/// Edge list of the graph described by `config`.
pub fn emit_graph(config: &ExperimentConfig, base_dir: &Path) -> Result<String> {
    Ok(load_graph(config, base_dir)?.to_edge_list())
}
