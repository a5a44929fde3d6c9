//! Runs RCPP with the 2-bit infinity-norm quantizer on the default
//! instance and reports the fitted linear rate, bits and the tracking gap.
//!
//! ```text
//! cargo run --release --example rcpp_convergence
//! ```

use nalgebra::DMatrix;
use rcpp::algorithm::run_observed;
use rcpp::objectives::RidgeSettings;
use rcpp::{
    build_mixing, fit_rate, make_ring, Algorithm, Compressor, CompressorSpec, RidgeProblem, RunConfig,
    ScalingSchedule, WeightScheme,
};

fn main() -> rcpp::Result<()> {
    let pb = RidgeProblem::generate(&RidgeSettings::default())?;
    let g = make_ring(20, 20, 0)?;
    let mixing = build_mixing(&g, &g, WeightScheme::Perturbed { seed: 0 })?;
    let compressor = CompressorSpec::new(Compressor::Qn { b: 2 }, 10, 0)?;
    println!("certified constants: {:?}", compressor.constants);
    let config = RunConfig {
        step_sizes: vec![0.02; 20],
        alpha_x: 0.5,
        alpha_y: 0.5,
        gamma_x: 0.5,
        gamma_y: 0.5,
        schedule: ScalingSchedule::new(1.0, 0.995)?,
        iterations: 5000,
        compressor,
        mixing,
    };

    let mut worst_tracking: f64 = 0.0;
    let trace = run_observed(&config, &pb, Algorithm::Rcpp, 0, DMatrix::zeros(20, 10), |s| {
        worst_tracking = worst_tracking.max(s.tracking_gap());
    })
    .map_err(|f| f.error)?;

    for r in trace.records.iter().step_by(500) {
        println!("k = {:>4}  residual = {:.3e}  consensus = {:.3e}  bits = {}", r.k, r.residual, r.consensus_err, r.bits_cum);
    }
    let residuals: Vec<f64> = trace.records.iter().map(|r| r.residual).collect();
    let first = residuals.iter().position(|&r| r < 1e-8);
    println!("first k with residual < 1e-8: {first:?}");
    if let Some(fit) = fit_rate(&residuals, 500) {
        println!("fitted rate c_hat = {:.5}, r2 = {:.4} over {} points", fit.c_hat, fit.r2, fit.points);
    }
    println!("largest relative tracking gap: {worst_tracking:.2e}");
    Ok(())
}
