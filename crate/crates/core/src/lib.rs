//! Robust compressed push-pull (RCPP) for decentralized optimization over
//! directed graphs.
//!
//! `n` agents cooperatively minimize `f(x) = (1/n) Σ f_i(x)` while only
//! exchanging compressed vectors along the edges of a directed graph. Each
//! agent pulls decision variables through a row-stochastic matrix and pushes
//! gradient trackers through a column-stochastic one. Messages are
//! compressed as differences against a reference state and rescaled by a
//! decaying factor `s_k`, which keeps operators with an absolute error floor
//! (quantizers) from stalling the method.
//!
//! The crate is organised as:
//!
//! - [`digraph`]: directed graphs, strong connectivity, spanning-tree roots.
//! - [`mixing`]: row/column-stochastic weight matrices and their Perron vectors.
//! - [`compressors`]: compression operators, the dynamic-scaling wrapper and
//!   an empirical certifier for the error-contract constants.
//! - [`objectives`]: local objectives and the distributed ridge-regression
//!   instance with its closed-form minimizer.
//! - [`algorithm`]: the RCPP iteration, the uncompressed push-pull baseline
//!   and the static-scaling ablation.
//! - [`harness`]: per-iteration error metrics, bit accounting, rate fitting
//!   and CSV output.
//! - [`config`] and [`experiment`]: TOML experiment files and the
//!   orchestration behind the `rcpp` binary.
//!
//! ```
//! use rcpp::objectives::RidgeSettings;
//! use rcpp::*;
//!
//! # fn main() -> rcpp::Result<()> {
//! let problem = RidgeProblem::generate(&RidgeSettings { agents: 5, dim: 3, ..Default::default() })?;
//! let graph = make_ring(5, 2, 0)?;
//! let config = RunConfig {
//!     step_sizes: vec![0.02; 5],
//!     alpha_x: 0.5,
//!     alpha_y: 0.5,
//!     gamma_x: 0.5,
//!     gamma_y: 0.5,
//!     schedule: ScalingSchedule::new(1.0, 0.99)?,
//!     iterations: 2000,
//!     compressor: CompressorSpec::new(Compressor::Uniform { level: 0.5 }, 3, 0)?,
//!     mixing: build_mixing(&graph, &graph, WeightScheme::Perturbed { seed: 0 })?,
//! };
//! let trace = run(&config, &problem, Algorithm::Rcpp, 0).map_err(|f| f.error)?;
//! assert!(trace.records.last().unwrap().residual < 1e-6);
//! # Ok(())
//! # }
//! ```

pub mod algorithm;
pub mod compressors;
pub mod config;
pub mod digraph;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod mixing;
pub mod objectives;
pub mod rng;

pub use algorithm::{pushpull_step, rcpp_step, run, AlgoState, Algorithm, RunConfig, Trace};
pub use compressors::{Compressor, CompressorSpec, ContractConstants, ScalingSchedule};
pub use config::{parse_config, ExperimentConfig};
pub use digraph::{make_ring, Digraph};
pub use error::{Error, Result};
pub use experiment::{cmd_certify, cmd_run, Experiment, RunReport};
pub use harness::{fit_rate, IterationRecord, RateFit};
pub use mixing::{build_mixing, MixingPair, WeightScheme};
pub use objectives::{DecentralizedObjective, RidgeProblem};
