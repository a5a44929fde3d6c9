#![allow(dead_code)]

use rcpp::objectives::RidgeSettings;
use rcpp::{
    build_mixing, make_ring, Compressor, CompressorSpec, RidgeProblem, RunConfig, ScalingSchedule, WeightScheme,
};

/// The default 20-agent, 10-dimensional ridge instance.
pub fn default_problem() -> RidgeProblem {
    RidgeProblem::generate(&RidgeSettings::default()).unwrap()
}

/// The tuned default run on a 20-node ring with 20 chords.
pub fn default_run(op: Compressor, c: f64) -> RunConfig {
    let g = make_ring(20, 20, 0).unwrap();
    let compressor = CompressorSpec::new(op, 10, 0).unwrap();
    let alpha = 0.5f64.min(1.0 / compressor.constants.scaling);
    RunConfig {
        step_sizes: vec![0.02; 20],
        alpha_x: alpha,
        alpha_y: alpha,
        gamma_x: 0.5,
        gamma_y: 0.5,
        schedule: ScalingSchedule::new(1.0, c).unwrap(),
        iterations: 5000,
        compressor,
        mixing: build_mixing(&g, &g, WeightScheme::Perturbed { seed: 0 }).unwrap(),
    }
}

/// Small instance for quick structural checks.
pub fn small(n: usize, p: usize, op: Compressor, iterations: usize, seed: u64) -> (RidgeProblem, RunConfig) {
    let pb = RidgeProblem::generate(&RidgeSettings { agents: n, dim: p, seed, ..Default::default() }).unwrap();
    let g = make_ring(n, n.min(n * n.saturating_sub(2)), seed).unwrap();
    let compressor = CompressorSpec::new(op, p, seed).unwrap();
    let alpha = 0.5f64.min(1.0 / compressor.constants.scaling);
    let cfg = RunConfig {
        step_sizes: vec![0.02; n],
        alpha_x: alpha,
        alpha_y: alpha,
        gamma_x: 0.5,
        gamma_y: 0.5,
        schedule: ScalingSchedule::new(1.0, 0.99).unwrap(),
        iterations,
        compressor,
        mixing: build_mixing(&g, &g, WeightScheme::Perturbed { seed }).unwrap(),
    };
    (pb, cfg)
}
