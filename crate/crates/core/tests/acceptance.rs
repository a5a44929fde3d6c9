//! Acceptance criteria on the default instance: n = 20, p = 10, rho = 0.1,
//! seeds 0 to 4. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any fails.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rcpp::algorithm::run_observed;
use rcpp::compressors::quantize_inf_norm;
use rcpp::config::OneOrMany;
use rcpp::experiment::cmd_certify;
use rcpp::{
    build_mixing, cmd_run, fit_rate, make_ring, AlgoState, Algorithm, Compressor, CompressorSpec, Digraph,
    ExperimentConfig, MixingPair, RidgeProblem, RunConfig, Trace, WeightScheme,
};

use common::{default_problem, default_run, small};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const BURN_IN: usize = 500;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

/// Worst invariant violations seen by an observer, as multiples of their
/// tolerances.
#[derive(Default, Clone, Copy)]
struct Invariants {
    tracking: f64,
    pull: f64,
    push: f64,
    states: usize,
}

impl Invariants {
    fn observe(&mut self, s: &AlgoState, mixing: &MixingPair) {
        let grad_sum = s.grad.row_sum();
        let tracking = (s.y.row_sum() - grad_sum).amax() / (1e-8 * (1.0 + s.grad.norm()));
        let r_hx = &mixing.pull * &s.h_x;
        let c_hy = &mixing.push * &s.h_y;
        let pull = (&s.h_pull - &r_hx).norm() / (1e-9 * (1.0 + r_hx.norm()));
        let push = (&s.h_push - &c_hy).norm() / (1e-9 * (1.0 + c_hy.norm()));
        self.tracking = self.tracking.max(tracking);
        self.pull = self.pull.max(pull);
        self.push = self.push.max(push);
        self.states += 1;
    }

    fn merge(&mut self, other: Invariants) {
        self.tracking = self.tracking.max(other.tracking);
        self.pull = self.pull.max(other.pull);
        self.push = self.push.max(other.push);
        self.states += other.states;
    }

    /// Each ratio must stay below one.
    fn holds(&self) -> (bool, bool) {
        (self.tracking < 1.0, self.pull < 1.0 && self.push < 1.0)
    }
}

struct Observed {
    trace: Trace,
    invariants: Invariants,
    elapsed: Duration,
}

fn observed_run(cfg: &RunConfig, pb: &RidgeProblem, algo: Algorithm, seed: u64) -> Observed {
    let mut inv = Invariants::default();
    let start = Instant::now();
    let x0 = DMatrix::zeros(pb.features.nrows(), pb.features.ncols());
    let trace = run_observed(cfg, pb, algo, seed, x0, |s| inv.observe(s, &cfg.mixing)).expect("run completes");
    Observed { trace, invariants: inv, elapsed: start.elapsed() }
}

fn residuals(t: &Trace) -> Vec<f64> {
    t.records.iter().map(|r| r.residual).collect()
}

fn bits_monotone(t: &Trace) -> bool {
    t.records.windows(2).all(|w| w[1].bits_cum >= w[0].bits_cum)
}

struct Shared {
    qn_runs: Vec<Observed>,
    uniform_dynamic: Vec<Observed>,
    uniform_static: Vec<Observed>,
    pushpull: Observed,
}

fn criterion_1(s: &Shared) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for run in &s.qn_runs {
        let r = residuals(&run.trace);
        let first = r.iter().position(|&v| v < 1e-8);
        let fit = fit_rate(&r, BURN_IN);
        let good = first.is_some()
            && fit.is_some_and(|f| f.c_hat < 1.0 && f.r2 > 0.95)
            && run.elapsed < Duration::from_secs(10);
        ok &= good;
        let (c, r2) = fit.map_or((f64::NAN, f64::NAN), |f| (f.c_hat, f.r2));
        parts.push(format!(
            "seed {}: <1e-8 at k={} c_hat={c:.5} r2={r2:.4} {:.2}s",
            run.trace.seed,
            first.map_or("never".into(), |k| k.to_string()),
            run.elapsed.as_secs_f64()
        ));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_2() -> Outcome {
    let (pb, mut cfg) = small(5, 4, Compressor::Identity, 200, 0);
    cfg.gamma_x = 1.0;
    cfg.gamma_y = 1.0;
    cfg.compressor = CompressorSpec::identity(4);
    let collect = |algo| {
        let mut states = Vec::new();
        run_observed(&cfg, &pb, algo, 0, DMatrix::zeros(5, 4), |s| states.push((s.x.clone(), s.y.clone())))
            .expect("run completes");
        states
    };
    let a = collect(Algorithm::Rcpp);
    let b = collect(Algorithm::PushPull);
    let mut worst: f64 = 0.0;
    for ((xa, ya), (xb, yb)) in a.iter().zip(&b) {
        for (u, v) in xa.iter().chain(ya.iter()).zip(xb.iter().chain(yb.iter())) {
            worst = worst.max((u - v).abs() / v.abs().max(1.0));
        }
    }
    outcome(
        a.len() == 201 && b.len() == 201 && worst <= 1e-12,
        format!("{} iterates, max entry-wise deviation {worst:.2e}", a.len() - 1),
    )
}

fn all_runs(s: &Shared) -> impl Iterator<Item = &Observed> {
    s.qn_runs.iter().chain(&s.uniform_dynamic).chain(&s.uniform_static).chain(std::iter::once(&s.pushpull))
}

fn criterion_3(s: &Shared) -> Outcome {
    let mut inv = Invariants::default();
    all_runs(s).for_each(|r| inv.merge(r.invariants));
    outcome(
        inv.holds().0,
        format!("{} states, worst gap {:.2e} of the tolerance", inv.states, inv.tracking),
    )
}

fn criterion_4(s: &Shared) -> Outcome {
    let mut inv = Invariants::default();
    all_runs(s).for_each(|r| inv.merge(r.invariants));
    outcome(
        inv.holds().1,
        format!(
            "{} states, worst H_R gap {:.2e}, H_C gap {:.2e} of the tolerance",
            inv.states, inv.pull, inv.push
        ),
    )
}

fn criterion_5(s: &Shared) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (d, st) in s.uniform_dynamic.iter().zip(&s.uniform_static) {
        let fd = *residuals(&d.trace).last().unwrap();
        let fs = *residuals(&st.trace).last().unwrap();
        ok &= fd < 1e-8 && fs > 1e-4;
        parts.push(format!("seed {}: dynamic {fd:.2e} static {fs:.2e}", d.trace.seed));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_6() -> Outcome {
    let d = 16;
    let n = 100_000;
    let mut ok = true;
    let mut parts = Vec::new();
    for (op, extra) in [
        (Compressor::Identity, "exact"),
        (Compressor::TopK { k: 4 }, "delta"),
        (Compressor::Uniform { level: 1.0 }, "sigma2"),
    ] {
        let start = Instant::now();
        let report = cmd_certify(op, d, n, 0).expect("certify");
        let elapsed = start.elapsed();
        let e = report.estimated;
        let specific = match extra {
            "exact" => e.relative == 0.0 && e.absolute == 0.0,
            "delta" => e.contraction + 3.0 * e.contraction_stderr >= 4.0 / 16.0,
            _ => e.absolute - 3.0 * e.absolute_stderr <= d as f64 / 4.0,
        };
        let good = report.passed() && specific && elapsed < Duration::from_secs(5);
        ok &= good;
        parts.push(format!(
            "{}: C={:.3e} sigma2={:.3e} delta={:.4} ({:.2}s)",
            op.name(),
            e.relative,
            e.absolute,
            e.contraction,
            elapsed.as_secs_f64()
        ));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 100_000;
    let d = 8;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let scale = rng.random_range(0.1..20.0);
        let x: Vec<f64> = (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let mut sum = DVector::<f64>::zeros(d);
        let mut sq = DVector::<f64>::zeros(d);
        for _ in 0..draws {
            let q = quantize_inf_norm(&x, 2, &mut rng).expect("finite input");
            for j in 0..d {
                sum[j] += q[j];
                sq[j] += q[j] * q[j];
            }
        }
        for j in 0..d {
            let mean = sum[j] / draws as f64;
            let var = (sq[j] / draws as f64 - mean * mean).max(0.0);
            let se = (var / draws as f64).sqrt();
            let z = if se > 0.0 { (mean - x[j]).abs() / se } else if (mean - x[j]).abs() < 1e-12 { 0.0 } else { f64::INFINITY };
            worst = worst.max(z);
        }
    }
    outcome(worst <= 4.0, format!("10 vectors x {d} coords, worst deviation {worst:.2} standard errors"))
}

fn criterion_8(s: &Shared) -> Outcome {
    let raw = s.pushpull.trace.records.last().unwrap().bits_cum;
    let iterations = s.pushpull.trace.records.len() - 1;
    let mut ok = all_runs(s).all(|r| bits_monotone(&r.trace));
    let mut worst_ratio = f64::INFINITY;
    for run in &s.qn_runs {
        assert_eq!(run.trace.records.len() - 1, iterations);
        let bits = run.trace.records.last().unwrap().bits_cum;
        worst_ratio = worst_ratio.min(raw as f64 / bits as f64);
    }
    ok &= worst_ratio >= 10.0;
    outcome(ok, format!("raw {raw} bits over {iterations} iterations, smallest saving {worst_ratio:.1}x"))
}

fn reach_roots(g: &Digraph) -> BTreeSet<usize> {
    let n = g.node_count();
    let mut r = vec![vec![false; n]; n];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
    }
    for (a, b) in g.edges() {
        r[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                r[i][j] |= r[i][k] && r[k][j];
            }
        }
    }
    (0..n).filter(|&i| r[i].iter().all(|&v| v)).collect()
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = 0;
    let mut corpus = Vec::new();
    for seed in 0..100u64 {
        let n = 3 + (seed as usize % 18);
        let chords = rng.random_range(0..=n * (n - 2));
        let pull = make_ring(n, chords, seed).expect("ring");
        let push = make_ring(n, rng.random_range(0..=n * (n - 2)), seed + 1000).expect("ring");
        let good = build_mixing(&pull, &push, WeightScheme::Perturbed { seed })
            .and_then(|m| m.check().map(|_| m.perron_overlap()))
            .is_ok_and(|overlap| overlap > 0.0);
        failures += usize::from(!good);
        if n <= 6 {
            corpus.push(pull);
        }
    }
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let p: f64 = rng.random_range(0.05..0.6);
        let edges: Vec<_> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let edges: Vec<_> = edges.into_iter().filter(|_| rng.random::<f64>() < p).collect();
        corpus.push(Digraph::from_edges(n, edges).expect("edges in range"));
    }
    let mismatches = corpus.iter().filter(|g| g.root_set() != reach_roots(g)).count();
    outcome(
        failures == 0 && mismatches == 0,
        format!("100 mixing instances, {failures} failed; {} small graphs, {mismatches} root-set mismatches", corpus.len()),
    )
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .expect("output dir")
        .map(|e| e.expect("entry").path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).expect("read")))
        .collect();
    files.sort();
    files
}

fn criterion_10() -> Outcome {
    let mut config = ExperimentConfig::default();
    config.algorithm.name = OneOrMany::Many(vec!["rcpp".into(), "rcpp_static".into(), "pushpull".into()]);
    config.algorithm.iterations = 1500;
    config.output.seeds = vec![0, 1, 2];
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut outputs = Vec::new();
    for (i, workers) in [1, 4, 4, 2].into_iter().enumerate() {
        let out = tmp.path().join(format!("run{i}"));
        cmd_run(&config, Path::new("."), &out, workers).expect("cmd_run");
        outputs.push(dir_bytes(&out));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    let files = outputs[0].len();
    outcome(same && files == 3 * 3 + 2, format!("{files} files identical across 4 runs with 1, 4, 4 and 2 workers"))
}

fn main() {
    let pb = default_problem();
    let qn = default_run(Compressor::Qn { b: 2 }, 0.995);
    let uniform = default_run(Compressor::Uniform { level: 1.0 }, 0.995);
    let shared = Shared {
        qn_runs: SEEDS.iter().map(|&s| observed_run(&qn, &pb, Algorithm::Rcpp, s)).collect(),
        uniform_dynamic: SEEDS.iter().map(|&s| observed_run(&uniform, &pb, Algorithm::Rcpp, s)).collect(),
        uniform_static: SEEDS.iter().map(|&s| observed_run(&uniform, &pb, Algorithm::RcppStatic, s)).collect(),
        pushpull: observed_run(&default_run(Compressor::Identity, 0.995), &pb, Algorithm::PushPull, 0),
    };

    let results = [
        ("linear convergence", criterion_1(&shared)),
        ("push-pull degeneration", criterion_2()),
        ("tracking identity", criterion_3(&shared)),
        ("reference-state consistency", criterion_4(&shared)),
        ("dynamic scaling necessity", criterion_5(&shared)),
        ("compression contract certification", criterion_6()),
        ("quantizer unbiasedness", criterion_7()),
        ("bit accounting", criterion_8(&shared)),
        ("mixing matrix validity", criterion_9()),
        ("determinism", criterion_10()),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!("criterion {:>2} {} {name}: {}", i + 1, if o.ok { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.ok);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
