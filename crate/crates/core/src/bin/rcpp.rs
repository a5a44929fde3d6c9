use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rcpp::config::{parse_config, parse_config_str, ExperimentConfig};
use rcpp::experiment::{cmd_certify, cmd_run, emit_graph, render_certify, validate_graph};

#[derive(Parser)]
#[command(name = "rcpp", version, about = "Compressed push-pull experiments over directed graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set algorithm.c=0.99`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), String> {
        let cfg = match &self.config {
            Some(p) => parse_config(p, &self.overrides),
            None => parse_config_str("", "<defaults>", &self.overrides),
        }
        .map_err(|e| e.to_string())?;
        let base = self
            .config
            .as_deref()
            .and_then(Path::parent)
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok((cfg, base))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured algorithm and seed.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory [default: output.directory].
        #[arg(long, env = "RCPP_OUT_DIR")]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Estimate compression-contract constants of the configured compressor.
    Certify {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Vector dimension [default: problem.p].
        #[arg(long)]
        dim: Option<usize>,
        /// Draws per magnitude.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Emit or validate edge lists.
    #[command(subcommand)]
    Graph(GraphCommand),
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Write the configured graph as an edge list.
    Emit {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// File to write; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an edge-list file.
    Validate { path: PathBuf },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Run { cfg, out, workers } => {
            let (mut config, base) = cfg.load()?;
            if let Some(s) = cfg.seed {
                config.output.seeds = vec![s];
            }
            let out = out.unwrap_or_else(|| config.output.directory.clone());
            let report = cmd_run(&config, &base, &out, workers).map_err(|e| e.to_string())?;
            print!("{}", report.render());
            println!("summary written to {}", report.summary_path.display());
            Ok(if report.any_diverged() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::Certify { cfg, dim, samples } => {
            let (config, _) = cfg.load()?;
            let dim = dim.unwrap_or(config.problem.p);
            let seed = cfg.seed.unwrap_or(config.problem.seed);
            let report = cmd_certify(config.compressor, dim, samples, seed).map_err(|e| e.to_string())?;
            print!("{}", render_certify(&report));
            Ok(ExitCode::SUCCESS)
        }
        Command::Graph(GraphCommand::Emit { cfg, out }) => {
            let (mut config, base) = cfg.load()?;
            if let Some(s) = cfg.seed {
                config.graph.seed = s;
            }
            let text = emit_graph(&config, &base).map_err(|e| e.to_string())?;
            match out {
                Some(p) => std::fs::write(&p, text).map_err(|e| format!("{}: {e}", p.display()))?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Graph(GraphCommand::Validate { path }) => {
            let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            let report = validate_graph(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            print!("{}", report.render());
            Ok(if report.admits_mixing { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
