//! Estimates the error-contract constants of every built-in compressor by
//! Monte Carlo and checks them against the declared or derived values.
//!
//! ```text
//! cargo run --release --example certify_compressors [samples]
//! ```

use rcpp::experiment::{cmd_certify, render_certify};
use rcpp::Compressor;

fn main() -> rcpp::Result<()> {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let dim = 16;
    for op in [
        Compressor::Identity,
        Compressor::TopK { k: 4 },
        Compressor::Uniform { level: 1.0 },
        Compressor::Qn { b: 2 },
        Compressor::Qtn { b: 2, k: 8 },
    ] {
        let report = cmd_certify(op, dim, samples, 0)?;
        println!("{}", render_certify(&report));
    }
    Ok(())
}
