mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rcpp::algorithm::{pushpull_step, run_observed};
use rcpp::harness::weighted_average;
use rcpp::{fit_rate, run, AlgoState, Algorithm, Compressor, CompressorSpec, DecentralizedObjective};

use common::{default_problem, default_run, small};

#[test]
fn pushpull_reaches_the_minimizer_and_stays() {
    let (pb, mut cfg) = small(6, 3, Compressor::Identity, 3000, 2);
    cfg.gamma_x = 1.0;
    cfg.gamma_y = 1.0;
    let mut last = None;
    let trace = run_observed(&cfg, &pb, Algorithm::PushPull, 0, DMatrix::zeros(6, 3), |s| last = Some(s.clone()))
        .unwrap();
    let mut state = last.unwrap();
    for i in 0..6 {
        let row: Vec<f64> = state.x.row(i).iter().copied().collect();
        let err: f64 = row.iter().zip(pb.minimizer.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-10, "agent {i}: {err}");
    }
    let before = state.x.clone();
    pushpull_step(&mut state, &cfg, &pb).unwrap();
    assert!((&state.x - before).amax() < 1e-13);
    assert!(trace.records.last().unwrap().residual < 1e-20);
}

#[test]
fn pushpull_tail_decays_geometrically() {
    let pb = default_problem();
    let cfg = default_run(Compressor::Identity, 0.995);
    let trace = run(&cfg, &pb, Algorithm::PushPull, 0).unwrap();
    let r: Vec<f64> = trace.records.iter().map(|r| r.residual).collect();
    // every window of 100 iterations shrinks the residual until the floor
    for k in (500..r.len() - 100).step_by(100) {
        if r[k + 100] < 1e-25 {
            break;
        }
        assert!(r[k + 100] < r[k], "k = {k}: {} -> {}", r[k], r[k + 100]);
    }
    let fit = fit_rate(&r, 500).unwrap();
    assert!(fit.c_hat < 1.0 && fit.r2 > 0.99, "{fit:?}");
}

#[test]
fn compression_errors_vanish_with_the_scale() {
    let pb = default_problem();
    let trace = run(&default_run(Compressor::Qn { b: 2 }, 0.995), &pb, Algorithm::Rcpp, 1).unwrap();
    let peak = |f: fn(&rcpp::IterationRecord) -> f64| trace.records.iter().map(f).fold(0.0, f64::max);
    let last = trace.records.last().unwrap();
    // s_k² decays by 0.995^5000 ≈ 1.2e-11 over the run
    assert!(last.comp_err_x < 1e-9 && last.comp_err_x < 1e-9 * peak(|r| r.comp_err_x), "{last:?}");
    assert!(last.comp_err_y < 1e-8 && last.comp_err_y < 1e-9 * peak(|r| r.comp_err_y), "{last:?}");
    assert!(last.consensus_err < 1e-9, "{last:?}");
    assert!(last.tracking_err < 1e-8, "{last:?}");
}

#[test]
fn residual_matches_a_second_evaluation_path() {
    let (pb, cfg) = small(7, 4, Compressor::Qn { b: 3 }, 300, 4);
    let mut xs = Vec::new();
    let trace = run_observed(&cfg, &pb, Algorithm::Rcpp, 3, DMatrix::zeros(7, 4), |s| xs.push(s.x.clone())).unwrap();
    for (x, rec) in xs.iter().zip(&trace.records) {
        let xbar = weighted_average(x, &cfg.mixing);
        let direct = pb.value(xbar.as_slice()) - pb.optimal_value;
        assert!((rec.residual - direct).abs() < 1e-12 * (1.0 + direct.abs()), "k = {}", rec.k);
    }
}

#[test]
fn bits_grow_by_the_payload_cost() {
    let (pb, cfg) = small(5, 6, Compressor::Identity, 20, 1);
    let trace = run(&cfg, &pb, Algorithm::PushPull, 0).unwrap();
    let out_edges: u64 = (0..5).map(|i| cfg.mixing.pull_graph.transmit_degree(i) as u64).sum();
    for w in trace.records.windows(2) {
        assert_eq!(w[1].bits_cum - w[0].bits_cum, 2 * 64 * 6 * out_edges);
    }
    let trace = run(&cfg, &pb, Algorithm::Rcpp, 0).unwrap();
    for w in trace.records.windows(2) {
        assert_eq!(w[1].bits_cum - w[0].bits_cum, 2 * 64 * 6 * out_edges);
    }
}

#[test]
fn runs_are_reproducible_and_seed_dependent() {
    let (pb, cfg) = small(6, 5, Compressor::Qn { b: 2 }, 200, 8);
    let a = run(&cfg, &pb, Algorithm::Rcpp, 4).unwrap();
    let b = run(&cfg, &pb, Algorithm::Rcpp, 4).unwrap();
    let c = run(&cfg, &pb, Algorithm::Rcpp, 5).unwrap();
    assert_eq!(a.records, b.records);
    assert_ne!(a.records, c.records);
}

#[test]
fn invariants_hold_for_every_operator() {
    for op in [
        Compressor::Identity,
        Compressor::Qn { b: 2 },
        Compressor::TopK { k: 2 },
        Compressor::Qtn { b: 2, k: 3 },
        Compressor::Uniform { level: 0.5 },
    ] {
        let (pb, cfg) = small(6, 5, op, 400, 6);
        let mut worst = (0.0f64, 0.0f64, 0.0f64);
        run_observed(&cfg, &pb, Algorithm::Rcpp, 2, DMatrix::zeros(6, 5), |s: &AlgoState| {
            let (pull, push) = s.consistency_gaps(&cfg.mixing);
            worst = (worst.0.max(s.tracking_gap()), worst.1.max(pull), worst.2.max(push));
        })
        .unwrap();
        assert!(worst.0 < 1e-10 && worst.1 < 1e-10 && worst.2 < 1e-10, "{op:?}: {worst:?}");
    }
}

#[test]
fn static_ablation_ignores_the_decay() {
    let (pb, mut cfg) = small(5, 3, Compressor::Uniform { level: 1.0 }, 100, 3);
    let a = run(&cfg, &pb, Algorithm::RcppStatic, 0).unwrap();
    cfg.schedule.c = 1.0;
    let b = run(&cfg, &pb, Algorithm::Rcpp, 0).unwrap();
    assert_eq!(a.records, b.records);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identity_rcpp_with_unit_gains_is_pushpull(seed in 0u64..1000, n in 2usize..7) {
        let (pb, mut cfg) = small(n, 3, Compressor::Identity, 60, seed);
        cfg.gamma_x = 1.0;
        cfg.gamma_y = 1.0;
        cfg.compressor = CompressorSpec::identity(3);
        let a = run(&cfg, &pb, Algorithm::Rcpp, seed).unwrap();
        let b = run(&cfg, &pb, Algorithm::PushPull, seed).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            prop_assert!((ra.residual - rb.residual).abs() <= 1e-12 * (1.0 + rb.residual));
            prop_assert!((ra.consensus_err - rb.consensus_err).abs() <= 1e-12 * (1.0 + rb.consensus_err));
        }
    }

    #[test]
    fn fit_rate_ignores_scale(c in 0.5f64..0.999, a in 1e-6f64..1e6, len in 20usize..400) {
        let r: Vec<f64> = (0..len).map(|k| c.powi(k as i32)).collect();
        let scaled: Vec<f64> = r.iter().map(|v| v * a).collect();
        if let (Some(f), Some(g)) = (fit_rate(&r, 0), fit_rate(&scaled, 0)) {
            let m = f.points.min(g.points);
            let f = fit_rate(&r[..m], 0).unwrap();
            let g = fit_rate(&scaled[..m], 0).unwrap();
            prop_assert!((f.c_hat - g.c_hat).abs() < 1e-9);
            prop_assert!((f.c_hat - c).abs() < 1e-9);
        }
    }
}
