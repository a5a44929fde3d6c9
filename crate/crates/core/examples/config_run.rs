//! Drives a full experiment from TOML text, the way the `rcpp run`
//! subcommand does, and prints the canonical config and the summary.
//!
//! ```text
//! cargo run --release --example config_run [output-dir]
//! ```

use std::path::{Path, PathBuf};

use rcpp::cmd_run;
use rcpp::config::parse_config_str;

const CONFIG: &str = r#"
[algorithm]
name = ["rcpp", "rcpp_static"]
K = 5000

[compressor]
kind = "uniform"
level = 1.0

[output]
seeds = [0, 1]
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let overrides = ["graph.extra_edges=30".to_string()];
    let config = parse_config_str(CONFIG, "inline", &overrides)?;
    println!("# canonical config\n{}", config.to_toml());

    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rcpp-config-run"));
    let report = cmd_run(&config, Path::new("."), &out, 2)?;
    print!("{}", report.render());
    println!("CSVs and summary in {}", out.display());
    Ok(())
}
