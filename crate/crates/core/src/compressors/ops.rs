//! Concrete compression operators and their bit costs.

use rand::Rng;

use crate::error::{invalid, Result};

/// Bits of one uncompressed `f64` entry.
pub const RAW_ENTRY_BITS: u64 = 64;

/// Width of the per-message header announcing the entry width of a
/// [`uniform_quantizer`] payload.
pub const UNIFORM_WIDTH_HEADER_BITS: u64 = 6;

pub(crate) fn ensure_finite(x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(invalid(format!("non-finite entry {} at index {i}", x[i]))),
        None => Ok(()),
    }
}

/// Bits needed to write the integer `m` in binary, i.e. `ceil(log2(m + 1))`.
fn binary_width(m: u64) -> u64 {
    u64::from(u64::BITS - m.leading_zeros())
}

pub fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Randomized integer rounding of a nonnegative scalar: `floor(t) + 1` with
/// probability `t - floor(t)`, otherwise `floor(t)`. Integers map to
/// themselves.
pub fn randomized_round<R: Rng + ?Sized>(t: f64, rng: &mut R) -> f64 {
    let lo = t.floor();
    if rng.random::<f64>() < t - lo {
        lo + 1.0
    } else {
        lo
    }
}

/// Header announcing the rounded infinity norm:
/// `ceil(log2(floor(t) + 1)) + 1` bits.
pub fn norm_header_bits(norm: f64) -> u64 {
    // saturating cast; norms beyond 2^64 are not meaningful for a header
    binary_width(norm.floor() as u64) + 1
}

/// `b`-bit infinity-norm quantization with a randomized norm.
///
/// Each entry becomes `h(‖x‖∞) / 2^(b-1) · sign(x_i) · floor(2^(b-1)|x_i|/‖x‖∞ + u_i)`
/// with `u_i ~ U[0,1)` and `h` the [`randomized_round`] of the norm. Both
/// roundings are unbiased, so the operator is unbiased. The zero vector maps
/// to itself.
pub fn quantize_inf_norm<R: Rng + ?Sized>(x: &[f64], bits: u32, rng: &mut R) -> Result<Vec<f64>> {
    if bits == 0 || bits > 52 {
        return Err(invalid(format!("bits per entry must be in 1..=52, got {bits}")));
    }
    ensure_finite(x)?;
    let norm = inf_norm(x);
    if norm == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    let levels = (1u64 << (bits - 1)) as f64;
    let h = randomized_round(norm, rng);
    Ok(x.iter()
        .map(|&v| {
            let level = (levels * v.abs() / norm + rng.random::<f64>()).floor();
            h / levels * v.signum() * level
        })
        .collect())
}

/// `d·b` entry bits plus the norm header; the zero vector costs the header
/// alone.
pub fn quantize_inf_norm_bits(x: &[f64], bits: u32) -> u64 {
    let norm = inf_norm(x);
    let payload = if norm == 0.0 {
        0
    } else {
        x.len() as u64 * u64::from(bits)
    };
    payload + norm_header_bits(norm)
}

fn check_k(k: usize, d: usize) -> Result<()> {
    if k == 0 || k > d {
        return Err(invalid(format!("top-k needs 1 <= k <= d, got k = {k}, d = {d}")));
    }
    Ok(())
}

/// Indices of the `k` largest-magnitude entries; ties go to the lower index.
pub fn top_k_indices(x: &[f64], k: usize) -> Result<Vec<usize>> {
    check_k(k, x.len())?;
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    Ok(order)
}

/// Keeps the `k` largest-magnitude entries of `x` and zeroes the rest.
pub fn top_k(x: &[f64], k: usize) -> Result<Vec<f64>> {
    ensure_finite(x)?;
    let mut out = vec![0.0; x.len()];
    for i in top_k_indices(x, k)? {
        out[i] = x[i];
    }
    Ok(out)
}

fn index_bits(d: usize) -> u64 {
    // ceil(log2(d))
    binary_width(d.saturating_sub(1) as u64)
}

/// `k` raw entries plus their indices.
pub fn top_k_bits(d: usize, k: usize) -> u64 {
    k as u64 * (RAW_ENTRY_BITS + index_bits(d))
}

/// Top-k sparsification followed by [`quantize_inf_norm`] on the survivors.
pub fn quantize_topk<R: Rng + ?Sized>(x: &[f64], bits: u32, k: usize, rng: &mut R) -> Result<Vec<f64>> {
    quantize_inf_norm(&top_k(x, k)?, bits, rng)
}

/// `k·(b + ceil(log2 d))` bits for the surviving entries and their indices,
/// plus the norm header. `sparse` is the top-k output the quantizer saw.
pub fn quantize_topk_bits(sparse: &[f64], bits: u32, k: usize) -> u64 {
    let norm = inf_norm(sparse);
    let payload = if norm == 0.0 {
        0
    } else {
        k as u64 * (u64::from(bits) + index_bits(sparse.len()))
    };
    payload + norm_header_bits(norm)
}

/// Rounds every entry to the nearest multiple of `level`, ties toward +∞.
/// The error is at most `level / 2` per entry.
pub fn uniform_quantizer(x: &[f64], level: f64) -> Result<Vec<f64>> {
    if !(level > 0.0 && level.is_finite()) {
        return Err(invalid(format!("quantization level must be positive, got {level}")));
    }
    ensure_finite(x)?;
    Ok(x.iter().map(|&v| level * (v / level + 0.5).floor()).collect())
}

/// Sign-magnitude integers of a common width plus a width header.
pub fn uniform_quantizer_bits(quantized: &[f64], level: f64) -> u64 {
    let max_mag = quantized
        .iter()
        .map(|v| (v / level).round().abs() as u64)
        .max()
        .unwrap_or(0);
    UNIFORM_WIDTH_HEADER_BITS + quantized.len() as u64 * (1 + binary_width(max_mag))
}
