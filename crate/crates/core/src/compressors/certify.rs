//! Monte-Carlo certification of contract constants.
//!
//! Random directions are drawn at a ladder of magnitudes. At each magnitude
//! the mean squared error of `C(x)` and of `C(x)/r` is estimated together
//! with its standard error. Declared constants pass when every magnitude
//! satisfies its bound within three standard errors.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Compressor, CompressorSpec, ContractConstants};
use crate::error::{invalid, Error, Result};
use crate::rng::{stream, Role};

/// Magnitudes `‖x‖` at which the error is sampled.
pub const CERTIFY_SCALES: [f64; 10] = [0.0, 1e-3, 1e-2, 0.1, 0.3, 1.0, 3.0, 10.0, 100.0, 1e3];

const MIN_SAMPLES: usize = 100;
const SLACK_SE: f64 = 3.0;
/// Magnitudes from which slopes are read when deriving constants.
pub const SLOPE_SCALE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanStderr {
    fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self {
            mean,
            stderr: (var / n).sqrt(),
        }
    }

    fn upper(&self) -> f64 {
        self.mean + SLACK_SE * self.stderr
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleEstimate {
    pub norm: f64,
    /// `E‖C(x) − x‖²`
    pub error: MeanStderr,
    /// `E‖C(x)/r − x‖²`
    pub scaled_error: MeanStderr,
}

impl ScaleEstimate {
    fn sq_norm(&self) -> f64 {
        self.norm * self.norm
    }
}

/// Fitted constants with standard errors of the two slope estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimates {
    pub relative: f64,
    pub relative_stderr: f64,
    pub absolute: f64,
    pub absolute_stderr: f64,
    pub contraction: f64,
    pub contraction_stderr: f64,
    pub scaled_absolute: f64,
    pub scaled_absolute_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyReport {
    pub operator: Compressor,
    pub dim: usize,
    pub samples: usize,
    pub declared: ContractConstants,
    pub scales: Vec<ScaleEstimate>,
    pub estimated: Estimates,
    /// Relative/absolute bound holds at every scale.
    pub relative_bound_holds: bool,
    /// `r`-scaled contraction bound holds at every scale.
    pub contraction_bound_holds: bool,
}

impl CertifyReport {
    pub fn passed(&self) -> bool {
        self.relative_bound_holds && self.contraction_bound_holds
    }
}

/// Estimates the contract constants of `spec` from `samples` draws per
/// magnitude scale and checks them against the declared ones.
pub fn certify_compressor(spec: &CompressorSpec, samples: usize, seed: u64) -> Result<CertifyReport> {
    if samples < MIN_SAMPLES {
        return Err(invalid(format!("certification needs at least {MIN_SAMPLES} samples, got {samples}")));
    }
    let declared = spec.constants;
    let scales = sample_scales(&spec.operator, spec.dim, declared.scaling, samples, seed)?;
    let estimated = fit(&scales);
    let dominated = |est: &MeanStderr, bound: f64, sq_norm: f64| {
        est.mean <= bound + SLACK_SE * est.stderr + 1e-12 * (1.0 + sq_norm)
    };
    let relative_bound_holds = scales.iter().all(|s| {
        dominated(&s.error, declared.relative * s.sq_norm() + declared.absolute, s.sq_norm())
    });
    let contraction_bound_holds = scales.iter().all(|s| {
        dominated(
            &s.scaled_error,
            (1.0 - declared.contraction) * s.sq_norm() + declared.scaled_absolute,
            s.sq_norm(),
        )
    });
    Ok(CertifyReport {
        operator: spec.operator,
        dim: spec.dim,
        samples,
        declared,
        scales,
        estimated,
        relative_bound_holds,
        contraction_bound_holds,
    })
}

pub(crate) fn sample_scales(
    operator: &Compressor,
    dim: usize,
    scaling: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<ScaleEstimate>> {
    operator.validate(dim)?;
    let mut out = Vec::with_capacity(CERTIFY_SCALES.len());
    let mut x = vec![0.0; dim];
    let mut err = Vec::with_capacity(samples);
    let mut scaled_err = Vec::with_capacity(samples);
    for (idx, &norm) in CERTIFY_SCALES.iter().enumerate() {
        let mut rng = stream(seed, idx as u64, 0, Role::Certify);
        err.clear();
        scaled_err.clear();
        for _ in 0..samples {
            random_direction(&mut x, norm, &mut rng);
            let c = operator.compress(&x, &mut rng)?.values;
            let (mut e, mut er) = (0.0, 0.0);
            for (ci, xi) in c.iter().zip(&x) {
                e += (ci - xi).powi(2);
                er += (ci / scaling - xi).powi(2);
            }
            err.push(e);
            scaled_err.push(er);
        }
        out.push(ScaleEstimate {
            norm,
            error: MeanStderr::from_samples(&err),
            scaled_error: MeanStderr::from_samples(&scaled_err),
        });
    }
    Ok(out)
}

fn random_direction<R: Rng + ?Sized>(x: &mut [f64], norm: f64, rng: &mut R) {
    loop {
        for v in x.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let len = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len > 0.0 {
            x.iter_mut().for_each(|v| *v *= norm / len);
            return;
        }
    }
}

/// Slopes come from the largest magnitude, where the absolute part is
/// negligible. Each scale gives an intercept `mean − slope·‖x‖²` whose
/// standard error includes the slope's; the reported intercept is the one
/// with the largest lower confidence bound, so slope noise amplified at
/// mid-range magnitudes does not masquerade as an absolute error.
fn fit(scales: &[ScaleEstimate]) -> Estimates {
    let top = scales
        .iter()
        .max_by(|a, b| a.norm.total_cmp(&b.norm))
        .expect("at least one scale");
    let a = top.sq_norm();
    let relative = (top.error.mean / a).max(0.0);
    let relative_stderr = top.error.stderr / a;
    let contraction = (1.0 - top.scaled_error.mean / a).min(1.0);
    let contraction_stderr = top.scaled_error.stderr / a;
    let intercept = |pick: fn(&ScaleEstimate) -> MeanStderr, slope: f64, slope_se: f64| {
        scales
            .iter()
            .map(|s| {
                let excess = pick(s).mean - slope * s.sq_norm();
                let se = pick(s).stderr.hypot(slope_se * s.sq_norm());
                (excess, se)
            })
            .fold((0.0, 0.0), |best: (f64, f64), cur| {
                if cur.0 - SLACK_SE * cur.1 > best.0 - SLACK_SE * best.1 {
                    cur
                } else {
                    best
                }
            })
    };
    let (absolute, absolute_stderr) = intercept(|s| s.error, relative, relative_stderr);
    let (scaled_absolute, scaled_absolute_stderr) =
        intercept(|s| s.scaled_error, 1.0 - contraction, contraction_stderr);
    Estimates {
        relative,
        relative_stderr,
        absolute,
        absolute_stderr,
        contraction,
        contraction_stderr,
        scaled_absolute,
        scaled_absolute_stderr,
    }
}

/// Constants that dominate the sampled errors by three standard errors at
/// every scale. Slopes are the largest upper bounds over the magnitudes of
/// at least [`SLOPE_SCALE`], so they also dominate there and the intercepts
/// are set by the small magnitudes. The scaling `r` is chosen between `1`
/// and `1 + C_rel` (the optimum for unbiased operators) to maximize `δ`.
pub(crate) fn derive_constants(
    operator: &Compressor,
    dim: usize,
    samples: usize,
    seed: u64,
) -> Result<ContractConstants> {
    let slope = |scales: &[ScaleEstimate], pick: fn(&ScaleEstimate) -> MeanStderr| {
        scales
            .iter()
            .filter(|s| s.norm >= SLOPE_SCALE)
            .map(|s| pick(s).upper() / s.sq_norm())
            .fold(0.0, f64::max)
    };
    let intercept = |scales: &[ScaleEstimate], pick: fn(&ScaleEstimate) -> MeanStderr, slope: f64| {
        scales
            .iter()
            .map(|s| pick(s).upper() - slope * s.sq_norm())
            .fold(0.0, f64::max)
    };
    let base = sample_scales(operator, dim, 1.0, samples, seed)?;
    let relative = slope(&base, |s| s.error);
    let absolute = intercept(&base, |s| s.error, relative);

    let mut best: Option<ContractConstants> = None;
    for scaling in [1.0, 1.0 + relative] {
        let scales = sample_scales(operator, dim, scaling, samples, seed.wrapping_add(1))?;
        let contraction = (1.0 - slope(&scales, |s| s.scaled_error)).min(1.0);
        if contraction <= 0.0 {
            continue;
        }
        let candidate = ContractConstants {
            relative,
            absolute,
            scaling,
            contraction,
            scaled_absolute: intercept(&scales, |s| s.scaled_error, 1.0 - contraction),
        };
        if best.is_none_or(|b| candidate.contraction > b.contraction) {
            best = Some(candidate);
        }
    }
    best.ok_or_else(|| Error::AssumptionViolation {
        assumption: "compression contract",
        detail: format!("{} has no positive contraction at dimension {dim}", operator.name()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_certifies_exactly() {
        let report = certify_compressor(&CompressorSpec::identity(5), 200, 1).unwrap();
        assert!(report.passed());
        let e = report.estimated;
        assert_eq!((e.relative, e.absolute, e.contraction), (0.0, 0.0, 1.0));
    }

    #[test]
    fn top_k_contraction_at_least_k_over_d() {
        let spec = CompressorSpec::new(Compressor::TopK { k: 2 }, 6, 0).unwrap();
        let report = certify_compressor(&spec, 1000, 3).unwrap();
        assert!(report.passed());
        let e = report.estimated;
        assert!(e.contraction + 3.0 * e.contraction_stderr >= 1.0 / 3.0);
    }

    #[test]
    fn uniform_quantizer_floor() {
        let spec = CompressorSpec::new(Compressor::Uniform { level: 1.0 }, 4, 0).unwrap();
        let report = certify_compressor(&spec, 2000, 5).unwrap();
        assert!(report.passed());
        let e = report.estimated;
        assert!(e.relative < 1e-3, "{e:?}");
        assert!(e.absolute <= 1.0 + 3.0 * e.absolute_stderr, "{e:?}");
    }

    #[test]
    fn understated_constants_fail() {
        let spec = CompressorSpec::with_constants(
            Compressor::Uniform { level: 1.0 },
            4,
            ContractConstants { absolute: 0.01, scaled_absolute: 0.01, ..ContractConstants::EXACT },
        )
        .unwrap();
        let report = certify_compressor(&spec, 500, 5).unwrap();
        assert!(!report.relative_bound_holds);
        assert!(!report.passed());
    }

    #[test]
    fn qn_constants_are_certifiable() {
        let spec = CompressorSpec::new(Compressor::Qn { b: 2 }, 10, 0).unwrap();
        let c = spec.constants;
        assert!(c.relative > 0.0 && c.contraction > 0.0 && c.contraction <= 1.0, "{c:?}");
        assert!((c.scaling - 1.0 - c.relative).abs() < 1e-12 || c.scaling == 1.0);
        assert!(certify_compressor(&spec, 1000, 77).unwrap().passed());
    }

    #[test]
    fn too_few_samples() {
        assert!(certify_compressor(&CompressorSpec::identity(2), 10, 0).is_err());
    }
}
