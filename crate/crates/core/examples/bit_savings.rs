//! Compares transmitted bits of RCPP under several compressors with the
//! uncompressed push-pull baseline at equal iteration counts.
//!
//! ```text
//! cargo run --release --example bit_savings
//! ```

use rcpp::objectives::RidgeSettings;
use rcpp::{
    build_mixing, make_ring, run, Algorithm, Compressor, CompressorSpec, RidgeProblem, RunConfig, ScalingSchedule,
    WeightScheme,
};

fn main() -> rcpp::Result<()> {
    let pb = RidgeProblem::generate(&RidgeSettings::default())?;
    let g = make_ring(20, 20, 0)?;
    let mixing = build_mixing(&g, &g, WeightScheme::Perturbed { seed: 0 })?;
    let base = |compressor: CompressorSpec| -> rcpp::Result<RunConfig> {
        Ok(RunConfig {
            step_sizes: vec![0.02; 20],
            alpha_x: 0.5f64.min(1.0 / compressor.constants.scaling),
            alpha_y: 0.5f64.min(1.0 / compressor.constants.scaling),
            gamma_x: 0.5,
            gamma_y: 0.5,
            schedule: ScalingSchedule::new(1.0, 0.995)?,
            iterations: 5000,
            compressor,
            mixing: mixing.clone(),
        })
    };
    let baseline = run(&base(CompressorSpec::identity(10))?, &pb, Algorithm::PushPull, 0).map_err(|f| f.error)?;
    let raw = baseline.records.last().map_or(0, |r| r.bits_cum);
    println!("{:<10} {:>12} {:>10} {:>12}", "method", "bits", "ratio", "final");
    println!("{:<10} {:>12} {:>10} {:>12.3e}", "pushpull", raw, "1.0", baseline.records.last().unwrap().residual);
    for op in [Compressor::Qn { b: 2 }, Compressor::Qtn { b: 2, k: 5 }, Compressor::Uniform { level: 1.0 }] {
        let trace = run(&base(CompressorSpec::new(op, 10, 0)?)?, &pb, Algorithm::Rcpp, 0).map_err(|f| f.error)?;
        let last = trace.records.last().unwrap();
        println!(
            "{:<10} {:>12} {:>10.1} {:>12.3e}",
            op.name(),
            last.bits_cum,
            raw as f64 / last.bits_cum as f64,
            last.residual
        );
    }
    Ok(())
}
