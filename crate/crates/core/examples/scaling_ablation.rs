//! Uniform quantizer with a fixed step: a decaying scale lets RCPP converge
//! while a constant scale stalls at the quantization floor.
//!
//! ```text
//! cargo run --release --example scaling_ablation
//! ```

use rcpp::objectives::RidgeSettings;
use rcpp::{
    build_mixing, make_ring, run, Algorithm, Compressor, CompressorSpec, RidgeProblem, RunConfig, ScalingSchedule,
    WeightScheme,
};

fn main() -> rcpp::Result<()> {
    let pb = RidgeProblem::generate(&RidgeSettings::default())?;
    let g = make_ring(20, 20, 0)?;
    let config = RunConfig {
        step_sizes: vec![0.02; 20],
        alpha_x: 0.5,
        alpha_y: 0.5,
        gamma_x: 0.5,
        gamma_y: 0.5,
        schedule: ScalingSchedule::new(1.0, 0.995)?,
        iterations: 5000,
        compressor: CompressorSpec::new(Compressor::Uniform { level: 1.0 }, 10, 0)?,
        mixing: build_mixing(&g, &g, WeightScheme::Perturbed { seed: 0 })?,
    };
    println!("{:>6} {:>14} {:>14}", "k", "decaying", "static");
    let dynamic = run(&config, &pb, Algorithm::Rcpp, 0).map_err(|f| f.error)?;
    let fixed = run(&config, &pb, Algorithm::RcppStatic, 0).map_err(|f| f.error)?;
    for (a, b) in dynamic.records.iter().zip(&fixed.records).step_by(500) {
        println!("{:>6} {:>14.3e} {:>14.3e}", a.k, a.residual, b.residual);
    }
    let last = |t: &rcpp::Trace| t.records.last().map_or(f64::NAN, |r| r.residual);
    println!("final: decaying {:.3e}, static {:.3e}", last(&dynamic), last(&fixed));
    Ok(())
}
