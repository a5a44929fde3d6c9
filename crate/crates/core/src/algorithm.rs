//! The RCPP iteration and its baselines.
//!
//! One RCPP round, for decision variables `X` and trackers `Y` (rows are
//! agents):
//!
//! ```text
//! X̃  = X − ΛY
//! Q_x = s_k · C((X̃ − H_x) / s_k)            row-wise, per agent
//! X̂  = H_x + Q_x
//! X̂_R = H_R + R Q_x                          communication
//! H_x ← (1 − α_x) H_x + α_x X̂
//! H_R ← (1 − α_x) H_R + α_x X̂_R
//! X⁺  = X̃ − γ_x (X̂ − X̂_R)
//! Ỹ  = Y + ∇F(X⁺) − ∇F(X)
//! ...same five steps for Y with C, α_y, γ_y
//! ```
//!
//! `H_R` and `H_C` hold `R H_x` and `C H_y` without any agent storing its
//! neighbours' reference points.

use nalgebra::DMatrix;

use crate::compressors::{dynamic_scale, CompressorSpec, ScalingSchedule, RAW_ENTRY_BITS};
use crate::digraph::Digraph;
use crate::error::{invalid, Error, Result};
use crate::harness::{record, IterationRecord};
use crate::mixing::MixingPair;
use crate::objectives::DecentralizedObjective;
use crate::rng::{stream, Role};

/// Any iterate with a Frobenius norm above this counts as divergence.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoState {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub h_x: DMatrix<f64>,
    pub h_y: DMatrix<f64>,
    /// Aggregate `R H_x` received from in-neighbours.
    pub h_pull: DMatrix<f64>,
    /// Aggregate `C H_y` received from in-neighbours.
    pub h_push: DMatrix<f64>,
    /// `∇F(X)` at the current iterate.
    pub grad: DMatrix<f64>,
    pub k: usize,
}

impl AlgoState {
    /// `Y⁰ = ∇F(X⁰)` and all reference states zero.
    pub fn new<P: DecentralizedObjective + ?Sized>(problem: &P, x0: DMatrix<f64>) -> Result<Self> {
        let (n, p) = (problem.agents(), problem.dim());
        if x0.shape() != (n, p) {
            return Err(invalid(format!("initial point must be {n}x{p}, got {:?}", x0.shape())));
        }
        let mut grad = DMatrix::zeros(n, p);
        problem.stacked_gradient(&x0, &mut grad);
        Ok(Self {
            y: grad.clone(),
            grad,
            x: x0,
            h_x: DMatrix::zeros(n, p),
            h_y: DMatrix::zeros(n, p),
            h_pull: DMatrix::zeros(n, p),
            h_push: DMatrix::zeros(n, p),
            k: 0,
        })
    }

    /// `‖1ᵀY − 1ᵀ∇F(X)‖∞ / (1 + ‖∇F(X)‖_F)`.
    pub fn tracking_gap(&self) -> f64 {
        let diff = self.y.row_sum() - self.grad.row_sum();
        diff.amax() / (1.0 + self.grad.norm())
    }

    /// Relative gaps `‖H_R − R H_x‖_F / (1 + ‖H_x‖_F)` and the same for
    /// `H_C` against `C H_y`.
    pub fn consistency_gaps(&self, mixing: &MixingPair) -> (f64, f64) {
        let pull = (&self.h_pull - &mixing.pull * &self.h_x).norm() / (1.0 + self.h_x.norm());
        let push = (&self.h_push - &mixing.push * &self.h_y).norm() / (1.0 + self.h_y.norm());
        (pull, push)
    }

    fn check_finite(&self) -> Result<()> {
        let bad = |m: &DMatrix<f64>| m.iter().any(|v| !v.is_finite()) || m.norm() > DIVERGENCE_NORM;
        if [&self.x, &self.y, &self.h_x, &self.h_y].into_iter().any(bad) {
            Err(Error::Divergence { iteration: self.k })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Diagonal of `Λ`, one step size per agent.
    pub step_sizes: Vec<f64>,
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub schedule: ScalingSchedule,
    pub iterations: usize,
    pub compressor: CompressorSpec,
    pub mixing: MixingPair,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.mixing.agents();
        if self.step_sizes.len() != n {
            return Err(invalid(format!(
                "{} step sizes for {n} agents",
                self.step_sizes.len()
            )));
        }
        if let Some(l) = self.step_sizes.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(invalid(format!("step sizes must be positive, got {l}")));
        }
        for (name, g) in [("gamma_x", self.gamma_x), ("gamma_y", self.gamma_y)] {
            if !(g > 0.0 && g <= 1.0) {
                return Err(invalid(format!("{name} must be in (0, 1], got {g}")));
            }
        }
        let cap = 1.0 / self.compressor.constants.scaling;
        for (name, a) in [("alpha_x", self.alpha_x), ("alpha_y", self.alpha_y)] {
            if !(a > 0.0 && a <= cap * (1.0 + 1e-12)) {
                return Err(invalid(format!("{name} must be in (0, 1/r] = (0, {cap}], got {a}")));
            }
        }
        Ok(())
    }

    /// `λ̄ = u_Rᵀ Λ u_C / n`.
    pub fn mean_step(&self) -> f64 {
        let m = &self.mixing;
        let weighted: f64 = (0..m.agents())
            .map(|i| m.pull_vector[i] * self.step_sizes[i] * m.push_vector[i])
            .sum();
        weighted / m.agents() as f64
    }

    /// `λ̂ = max_i λ_i`.
    pub fn max_step(&self) -> f64 {
        self.step_sizes.iter().copied().fold(0.0, f64::max)
    }

    /// Heuristic step-size warnings against the smoothness constant `L`.
    pub fn step_size_warnings(&self, smoothness: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.max_step() * smoothness > 1.0 {
            out.push(format!(
                "max step size {:.3e} exceeds 1/L = {:.3e}",
                self.max_step(),
                1.0 / smoothness
            ));
        }
        if self.mean_step() > 1.0 / smoothness {
            out.push(format!(
                "weighted mean step {:.3e} exceeds 1/L = {:.3e}",
                self.mean_step(),
                1.0 / smoothness
            ));
        }
        out
    }

    pub fn schedule_inputs(&self) -> ScheduleInputs {
        ScheduleInputs {
            max_step: self.max_step(),
            alpha_x: self.alpha_x,
            alpha_y: self.alpha_y,
            gamma_x: self.gamma_x,
            gamma_y: self.gamma_y,
            scaling: self.compressor.constants.scaling,
            contraction: self.compressor.constants.contraction,
        }
    }
}

fn scale_rows(m: &DMatrix<f64>, factors: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (i, f) in factors.iter().enumerate() {
        out.row_mut(i).scale_mut(*f);
    }
    out
}

/// Compresses each agent's row of `diff` with the dynamic scale and its
/// own random stream. Returns the recovered rows and the transmitted bits,
/// charging each payload once per out-neighbour.
fn compress_rows(
    diff: &DMatrix<f64>,
    compressor: &CompressorSpec,
    scale: f64,
    graph: &Digraph,
    seed: u64,
    k: usize,
    role: Role,
) -> Result<(DMatrix<f64>, u64)> {
    let (n, p) = diff.shape();
    let mut recovered = DMatrix::zeros(n, p);
    let mut row = vec![0.0; p];
    let mut bits = 0u64;
    for i in 0..n {
        row.iter_mut().zip(diff.row(i).iter()).for_each(|(r, v)| *r = *v);
        let mut rng = stream(seed, k as u64, i as u64, role);
        let (payload, rec) = dynamic_scale(&compressor.operator, &row, scale, &mut rng)?;
        bits += payload.bits * graph.transmit_degree(i) as u64;
        recovered.row_mut(i).iter_mut().zip(&rec).for_each(|(o, v)| *o = *v);
    }
    Ok((recovered, bits))
}

/// One RCPP round. Returns the bits transmitted during the round.
pub fn rcpp_step<P: DecentralizedObjective + ?Sized>(
    state: &mut AlgoState,
    config: &RunConfig,
    problem: &P,
    seed: u64,
) -> Result<u64> {
    let k = state.k;
    let scale = config.schedule.scale(k);
    let mixing = &config.mixing;
    let spec = &config.compressor;

    let x_tilde = &state.x - scale_rows(&state.y, &config.step_sizes);
    let (q_x, bits_x) = compress_rows(
        &(&x_tilde - &state.h_x),
        spec,
        scale,
        &mixing.pull_graph,
        seed,
        k,
        Role::CompressX,
    )?;
    let x_hat = &state.h_x + &q_x;
    let x_hat_pull = &state.h_pull + &mixing.pull * &q_x;
    let a = config.alpha_x;
    state.h_x = &state.h_x * (1.0 - a) + &x_hat * a;
    state.h_pull = &state.h_pull * (1.0 - a) + &x_hat_pull * a;
    let x_next = &x_tilde - (&x_hat - &x_hat_pull) * config.gamma_x;

    let mut grad_next = DMatrix::zeros(x_next.nrows(), x_next.ncols());
    problem.stacked_gradient(&x_next, &mut grad_next);
    let y_tilde = &state.y + &grad_next - &state.grad;
    let (q_y, bits_y) = compress_rows(
        &(&y_tilde - &state.h_y),
        spec,
        scale,
        &mixing.push_graph,
        seed,
        k,
        Role::CompressY,
    )?;
    let y_hat = &state.h_y + &q_y;
    let y_hat_push = &state.h_push + &mixing.push * &q_y;
    let a = config.alpha_y;
    state.h_y = &state.h_y * (1.0 - a) + &y_hat * a;
    state.h_push = &state.h_push * (1.0 - a) + &y_hat_push * a;
    state.y = &y_tilde - (&y_hat - &y_hat_push) * config.gamma_y;

    state.x = x_next;
    state.grad = grad_next;
    state.k += 1;
    state.check_finite()?;
    Ok(bits_x + bits_y)
}

fn raw_round_bits(graph: &Digraph, dim: usize) -> u64 {
    (0..graph.node_count())
        .map(|i| graph.transmit_degree(i) as u64)
        .sum::<u64>()
        * dim as u64
        * RAW_ENTRY_BITS
}

/// Uncompressed push-pull: `X⁺ = R(X − ΛY)`, `Y⁺ = C(Y + ∇F(X⁺) − ∇F(X))`.
/// Bits are charged as 64 per entry per out-edge.
pub fn pushpull_step<P: DecentralizedObjective + ?Sized>(
    state: &mut AlgoState,
    config: &RunConfig,
    problem: &P,
) -> Result<u64> {
    let mixing = &config.mixing;
    let x_next = &mixing.pull * (&state.x - scale_rows(&state.y, &config.step_sizes));
    let mut grad_next = DMatrix::zeros(x_next.nrows(), x_next.ncols());
    problem.stacked_gradient(&x_next, &mut grad_next);
    state.y = &mixing.push * (&state.y + &grad_next - &state.grad);
    state.x = x_next;
    state.grad = grad_next;
    state.k += 1;
    state.check_finite()?;
    let p = state.x.ncols();
    Ok(raw_round_bits(&mixing.pull_graph, p) + raw_round_bits(&mixing.push_graph, p))
}

/// Inputs to the advisory rate bound `ρ̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleInputs {
    pub max_step: f64,
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub scaling: f64,
    pub contraction: f64,
}

/// Network and problem constants that have no constructive recipe and must
/// be estimated by the user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateAdvisory {
    pub theta_pull: f64,
    pub theta_push: f64,
    /// `M` with `λ̄ ≥ M λ̂`.
    pub step_ratio: f64,
    pub pl_constant: f64,
}

/// The five contraction factors whose maximum is `ρ̃`:
/// `1 − Mλ̂μ/2`, `1 − θ_R γ_x/16`, `1 − θ_C γ_y/8`, `1 − α_x r δ/4`, `1 − α_y r δ/16`.
pub fn rate_terms(inputs: &ScheduleInputs, advisory: &RateAdvisory) -> [f64; 5] {
    let rd = inputs.scaling * inputs.contraction;
    [
        1.0 - 0.5 * advisory.step_ratio * inputs.max_step * advisory.pl_constant,
        1.0 - advisory.theta_pull * inputs.gamma_x / 16.0,
        1.0 - advisory.theta_push * inputs.gamma_y / 8.0,
        1.0 - inputs.alpha_x * rd / 4.0,
        1.0 - inputs.alpha_y * rd / 16.0,
    ]
}

/// Lower bound on the admissible decay ratio of the scaling schedule.
pub fn rho_tilde(inputs: &ScheduleInputs, advisory: &RateAdvisory) -> f64 {
    rate_terms(inputs, advisory)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulePlan {
    pub schedule: ScalingSchedule,
    pub rho_tilde: Option<f64>,
    pub warnings: Vec<String>,
}

/// Schedule `s_k² = c0 · rate^k`. With an advisory, also reports `ρ̃` and
/// warns when the decay is faster than the method can follow.
pub fn make_schedule(
    inputs: &ScheduleInputs,
    c0: f64,
    rate: f64,
    advisory: Option<&RateAdvisory>,
) -> Result<SchedulePlan> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(invalid(format!("rate target must be in (0, 1], got {rate}")));
    }
    let schedule = ScalingSchedule::new(c0, rate)?;
    let rho = advisory.map(|a| rho_tilde(inputs, a));
    let mut warnings = Vec::new();
    if let Some(r) = rho {
        if rate <= r {
            warnings.push(format!("decay ratio {rate} is not above the rate bound {r:.6}"));
        }
    }
    Ok(SchedulePlan {
        schedule,
        rho_tilde: rho,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Rcpp,
    PushPull,
    /// RCPP with `s_k` held at `sqrt(c0)`.
    RcppStatic,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Rcpp, Algorithm::PushPull, Algorithm::RcppStatic];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Rcpp => "rcpp",
            Self::PushPull => "pushpull",
            Self::RcppStatic => "rcpp_static",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
}

#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    /// Records up to the last finite iterate.
    pub partial: Trace,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} after {} records", self.error, self.partial.records.len())
    }
}

impl std::error::Error for RunFailure {}

/// Runs `config.iterations` rounds from `X⁰ = 0`.
pub fn run<P: DecentralizedObjective + ?Sized>(
    config: &RunConfig,
    problem: &P,
    algorithm: Algorithm,
    seed: u64,
) -> std::result::Result<Trace, Box<RunFailure>> {
    let x0 = DMatrix::zeros(problem.agents(), problem.dim());
    run_observed(config, problem, algorithm, seed, x0, |_| {})
}

/// Like [`run`] from an explicit `X⁰`, calling `observe` on every state
/// (including the initial one) before it is recorded.
pub fn run_observed<P, F>(
    config: &RunConfig,
    problem: &P,
    algorithm: Algorithm,
    seed: u64,
    x0: DMatrix<f64>,
    mut observe: F,
) -> std::result::Result<Trace, Box<RunFailure>>
where
    P: DecentralizedObjective + ?Sized,
    F: FnMut(&AlgoState),
{
    let mut trace = Trace {
        algorithm,
        seed,
        records: Vec::with_capacity(config.iterations + 1),
    };
    let fail = |error: Error, trace: Trace| Box::new(RunFailure { error, partial: trace });
    if let Err(e) = config.validate() {
        return Err(fail(e, trace));
    }
    if problem.agents() != config.mixing.agents() {
        let e = invalid(format!(
            "problem has {} agents, network has {}",
            problem.agents(),
            config.mixing.agents()
        ));
        return Err(fail(e, trace));
    }
    let static_config;
    let config = match algorithm {
        Algorithm::RcppStatic => {
            static_config = RunConfig {
                schedule: ScalingSchedule {
                    c: 1.0,
                    ..config.schedule
                },
                ..config.clone()
            };
            &static_config
        }
        _ => config,
    };
    let mut state = match AlgoState::new(problem, x0) {
        Ok(s) => s,
        Err(e) => return Err(fail(e, trace)),
    };
    let mut bits = 0u64;
    observe(&state);
    trace
        .records
        .push(record(&state, problem, &config.mixing, &config.step_sizes, bits));
    for _ in 0..config.iterations {
        let step = match algorithm {
            Algorithm::PushPull => pushpull_step(&mut state, config, problem),
            Algorithm::Rcpp | Algorithm::RcppStatic => rcpp_step(&mut state, config, problem, seed),
        };
        match step {
            Ok(b) => bits += b,
            Err(e) => return Err(fail(e, trace)),
        }
        observe(&state);
        trace
            .records
            .push(record(&state, problem, &config.mixing, &config.step_sizes, bits));
    }
    Ok(trace)
}
