//! Per-iteration metrics, rate fitting and CSV output.
//!
//! Consensus and tracking errors are measured in the Frobenius norm.

use std::io::Write;

use nalgebra::{DMatrix, RowDVector};

use crate::algorithm::AlgoState;
use crate::error::Result;
use crate::mixing::MixingPair;
use crate::objectives::DecentralizedObjective;

/// Residuals at or below this are treated as numerical noise by
/// [`fit_rate`].
pub const RESIDUAL_FLOOR: f64 = 1e-14;
const MIN_FIT_POINTS: usize = 10;

pub const CSV_HEADER: [&str; 7] = [
    "k",
    "residual",
    "consensus_err",
    "tracking_err",
    "comp_err_x",
    "comp_err_y",
    "bits_cum",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `f(x̄) − f*` with `x̄ = u_Rᵀ X / n`.
    pub residual: f64,
    /// `‖X − 1 x̄ᵀ‖_F²`
    pub consensus_err: f64,
    /// `‖Y − u_C ȳᵀ‖_F²` with `ȳ = 1ᵀY / n`.
    pub tracking_err: f64,
    /// `‖X − ΛY − H_x‖_F²`
    pub comp_err_x: f64,
    /// `‖Y − H_y‖_F²`
    pub comp_err_y: f64,
    pub bits_cum: u64,
}

/// `u_Rᵀ X / n`.
pub fn weighted_average(x: &DMatrix<f64>, mixing: &MixingPair) -> RowDVector<f64> {
    mixing.pull_vector.tr_mul(x) / x.nrows() as f64
}

pub fn record<P: DecentralizedObjective + ?Sized>(
    state: &AlgoState,
    problem: &P,
    mixing: &MixingPair,
    step_sizes: &[f64],
    bits_cum: u64,
) -> IterationRecord {
    let n = state.x.nrows();
    let ones = DMatrix::from_element(n, 1, 1.0);
    let x_bar = weighted_average(&state.x, mixing);
    let y_bar = state.y.row_sum() / n as f64;
    let consensus = &state.x - &ones * &x_bar;
    let tracking = &state.y - &mixing.push_vector * &y_bar;
    let mut comp_x = &state.x - &state.h_x;
    for (i, lambda) in step_sizes.iter().enumerate() {
        let yi = state.y.row(i) * *lambda;
        let mut row = comp_x.row_mut(i);
        row -= yi;
    }
    IterationRecord {
        k: state.k,
        residual: problem.excess(x_bar.as_slice()),
        consensus_err: consensus.norm_squared(),
        tracking_err: tracking.norm_squared(),
        comp_err_x: comp_x.norm_squared(),
        comp_err_y: (&state.y - &state.h_y).norm_squared(),
        bits_cum,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// Per-iteration contraction factor `exp(slope)`.
    pub c_hat: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least-squares fit of `log(residual)` against `k`, starting at
/// `burn_in` and stopping at the first residual at or below
/// [`RESIDUAL_FLOOR`]. `None` when fewer than ten points remain.
pub fn fit_rate(residuals: &[f64], burn_in: usize) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> = residuals
        .iter()
        .enumerate()
        .skip(burn_in)
        .take_while(|(_, r)| r.is_finite() && **r > RESIDUAL_FLOOR)
        .map(|(k, r)| (k as f64, r.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return None;
    }
    let m = pts.len() as f64;
    let kx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ly = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - kx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - kx) * (p.1 - ly)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - ly).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - ly - slope * (p.0 - kx)).powi(2))
        .sum();
    // a flat series is fitted perfectly by a zero slope
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Some(RateFit {
        c_hat: slope.exp(),
        r2,
        points: pts.len(),
    })
}

/// Writes records as CSV with the fixed header; floats carry 17
/// significant digits.
pub fn write_csv<W: Write>(records: &[IterationRecord], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(CSV_HEADER)?;
    for r in records {
        csv.write_record([
            r.k.to_string(),
            format!("{:.16e}", r.residual),
            format!("{:.16e}", r.consensus_err),
            format!("{:.16e}", r.tracking_err),
            format!("{:.16e}", r.comp_err_x),
            format!("{:.16e}", r.comp_err_y),
            r.bits_cum.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Averages traces of equal length field by field. Bits are averaged with
/// integer division.
pub fn average_records(traces: &[Vec<IterationRecord>]) -> Vec<IterationRecord> {
    let Some(first) = traces.first() else {
        return Vec::new();
    };
    let len = traces.iter().map(Vec::len).min().unwrap_or(0);
    let m = traces.len() as f64;
    (0..len)
        .map(|k| {
            let mean = |f: fn(&IterationRecord) -> f64| traces.iter().map(|t| f(&t[k])).sum::<f64>() / m;
            IterationRecord {
                k: first[k].k,
                residual: mean(|r| r.residual),
                consensus_err: mean(|r| r.consensus_err),
                tracking_err: mean(|r| r.tracking_err),
                comp_err_x: mean(|r| r.comp_err_x),
                comp_err_y: mean(|r| r.comp_err_y),
                bits_cum: traces.iter().map(|t| t[k].bits_cum).sum::<u64>() / traces.len() as u64,
            }
        })
        .collect()
}
