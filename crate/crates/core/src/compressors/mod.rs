//! Compression operators with relative and absolute error.
//!
//! Every operator `C` is described by five constants: for all `x`,
//!
//! ```text
//! E‖C(x) − x‖²    ≤ C_rel‖x‖² + σ²
//! E‖C(x)/r − x‖²  ≤ (1 − δ)‖x‖² + σ_r²
//! ```
//!
//! Relative-error operators (top-k) have `σ² = σ_r² = 0`; pure quantizers
//! with a fixed grid have `C_rel = 0, δ = 1`. [`dynamic_scale`] transmits
//! `C(x/s)` and recovers `s·C(x/s)`, which shrinks the absolute part of the
//! error to `s²σ²`.

mod certify;
mod ops;

pub use certify::{certify_compressor, CertifyReport, Estimates, MeanStderr, ScaleEstimate, CERTIFY_SCALES};
pub use ops::{
    inf_norm, norm_header_bits, quantize_inf_norm, quantize_inf_norm_bits, quantize_topk,
    quantize_topk_bits, randomized_round, top_k, top_k_bits, top_k_indices, uniform_quantizer,
    uniform_quantizer_bits, RAW_ENTRY_BITS, UNIFORM_WIDTH_HEADER_BITS,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Number of samples per magnitude scale used when certifying the
/// constants of operators that have no closed form.
pub const DEFAULT_CERTIFY_SAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Compressor {
    /// No compression; 64 bits per entry.
    Identity,
    /// `b`-bit infinity-norm quantization with randomized norm.
    Qn { b: u32 },
    /// Top-k sparsification.
    #[serde(rename = "topk")]
    TopK { k: usize },
    /// Top-k followed by `b`-bit infinity-norm quantization.
    Qtn { b: u32, k: usize },
    /// Deterministic rounding to a grid of step `level`.
    Uniform { level: f64 },
}

/// What goes over the wire for one vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Payload {
    pub values: Vec<f64>,
    pub bits: u64,
}

impl Compressor {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Qn { .. } => "qn",
            Self::TopK { .. } => "topk",
            Self::Qtn { .. } => "qtn",
            Self::Uniform { .. } => "uniform",
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if dim == 0 {
            return Err(invalid("compressor dimension must be positive"));
        }
        let bits_ok = |b: u32| {
            if (1..=52).contains(&b) {
                Ok(())
            } else {
                Err(invalid(format!("b must be in 1..=52, got {b}")))
            }
        };
        let k_ok = |k: usize| {
            if (1..=dim).contains(&k) {
                Ok(())
            } else {
                Err(invalid(format!("k must be in 1..={dim}, got {k}")))
            }
        };
        match *self {
            Self::Identity => Ok(()),
            Self::Qn { b } => bits_ok(b),
            Self::TopK { k } => k_ok(k),
            Self::Qtn { b, k } => bits_ok(b).and(k_ok(k)),
            Self::Uniform { level } if level > 0.0 && level.is_finite() => Ok(()),
            Self::Uniform { level } => Err(invalid(format!("level must be positive, got {level}"))),
        }
    }

    pub fn compress<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<Payload> {
        match *self {
            Self::Identity => {
                ops::ensure_finite(x)?;
                Ok(Payload {
                    values: x.to_vec(),
                    bits: x.len() as u64 * RAW_ENTRY_BITS,
                })
            }
            Self::Qn { b } => Ok(Payload {
                values: quantize_inf_norm(x, b, rng)?,
                bits: quantize_inf_norm_bits(x, b),
            }),
            Self::TopK { k } => Ok(Payload {
                values: top_k(x, k)?,
                bits: top_k_bits(x.len(), k),
            }),
            Self::Qtn { b, k } => {
                let sparse = top_k(x, k)?;
                let bits = quantize_topk_bits(&sparse, b, k);
                Ok(Payload {
                    values: quantize_inf_norm(&sparse, b, rng)?,
                    bits,
                })
            }
            Self::Uniform { level } => {
                let values = uniform_quantizer(x, level)?;
                let bits = uniform_quantizer_bits(&values, level);
                Ok(Payload { values, bits })
            }
        }
    }

    /// Closed-form contract constants, where they are known.
    pub fn declared_constants(&self, dim: usize) -> Option<ContractConstants> {
        match *self {
            Self::Identity => Some(ContractConstants::EXACT),
            Self::TopK { k } => {
                let keep = k as f64 / dim as f64;
                Some(ContractConstants {
                    relative: 1.0 - keep,
                    absolute: 0.0,
                    scaling: 1.0,
                    contraction: keep,
                    scaled_absolute: 0.0,
                })
            }
            Self::Uniform { level } => {
                let floor = dim as f64 * level * level / 4.0;
                Some(ContractConstants {
                    relative: 0.0,
                    absolute: floor,
                    scaling: 1.0,
                    contraction: 1.0,
                    scaled_absolute: floor,
                })
            }
            Self::Qn { .. } | Self::Qtn { .. } => None,
        }
    }
}

/// `(C_rel, σ², r, δ, σ_r²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractConstants {
    pub relative: f64,
    pub absolute: f64,
    pub scaling: f64,
    pub contraction: f64,
    pub scaled_absolute: f64,
}

impl ContractConstants {
    pub const EXACT: Self = Self {
        relative: 0.0,
        absolute: 0.0,
        scaling: 1.0,
        contraction: 1.0,
        scaled_absolute: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let ok = self.relative >= 0.0
            && self.absolute >= 0.0
            && self.scaling > 0.0
            && self.contraction > 0.0
            && self.contraction <= 1.0
            && self.scaled_absolute >= 0.0
            && [self.relative, self.absolute, self.scaling, self.scaled_absolute]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("inadmissible contract constants {self:?}")))
        }
    }
}

/// An operator together with its contract constants at a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressorSpec {
    pub operator: Compressor,
    pub dim: usize,
    pub constants: ContractConstants,
}

impl CompressorSpec {
    /// Uses the closed-form constants when available and certifies the
    /// rest empirically from `seed`.
    pub fn new(operator: Compressor, dim: usize, seed: u64) -> Result<Self> {
        operator.validate(dim)?;
        let constants = match operator.declared_constants(dim) {
            Some(c) => c,
            None => certify::derive_constants(&operator, dim, DEFAULT_CERTIFY_SAMPLES, seed)?,
        };
        Self::with_constants(operator, dim, constants)
    }

    pub fn with_constants(operator: Compressor, dim: usize, constants: ContractConstants) -> Result<Self> {
        operator.validate(dim)?;
        constants.validate()?;
        Ok(Self {
            operator,
            dim,
            constants,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            operator: Compressor::Identity,
            dim,
            constants: ContractConstants::EXACT,
        }
    }
}

/// Compresses `x / scale` and recovers `scale · C(x / scale)`.
///
/// The returned payload is what a sender transmits; the vector is what
/// every receiver reconstructs.
pub fn dynamic_scale<R: Rng + ?Sized>(
    operator: &Compressor,
    x: &[f64],
    scale: f64,
    rng: &mut R,
) -> Result<(Payload, Vec<f64>)> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid(format!("scale must be positive, got {scale}")));
    }
    let scaled: Vec<f64> = x.iter().map(|v| v / scale).collect();
    let payload = operator.compress(&scaled, rng)?;
    // x / s * s is not always x in floating point
    let recovered = if matches!(operator, Compressor::Identity) {
        x.to_vec()
    } else {
        payload.values.iter().map(|v| v * scale).collect()
    };
    Ok((payload, recovered))
}

/// `s_k = sqrt(c0 · c^k)`; `c = 1` keeps the scale fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSchedule {
    pub c0: f64,
    pub c: f64,
}

impl ScalingSchedule {
    pub fn new(c0: f64, c: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(invalid(format!("c0 must be positive, got {c0}")));
        }
        if !(c > 0.0 && c <= 1.0) {
            return Err(invalid(format!("decay ratio c must be in (0, 1], got {c}")));
        }
        Ok(Self { c0, c })
    }

    pub fn constant(c0: f64) -> Result<Self> {
        Self::new(c0, 1.0)
    }

    pub fn scale_squared(&self, k: usize) -> f64 {
        self.c0 * self.c.powf(k as f64)
    }

    pub fn scale(&self, k: usize) -> f64 {
        self.scale_squared(k).sqrt()
    }
}
