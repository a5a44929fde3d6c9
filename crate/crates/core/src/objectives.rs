//! Local objectives and the distributed ridge-regression instance.
//!
//! Agent `i` holds one sample `(u_i, v_i)` and the local objective
//! `f_i(x) = (u_iᵀx − v_i)² + ρ‖x‖²`. The network minimizes the average
//! `f = (1/n) Σ f_i`, whose minimizer solves `((1/n) Σ u_i u_iᵀ + ρI) x = (1/n) Σ v_i u_i`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::rng::{stream, Role};

/// A sum of `agents()` smooth local objectives over `R^dim`.
pub trait DecentralizedObjective: Sync {
    fn agents(&self) -> usize;
    fn dim(&self) -> usize;
    fn local_value(&self, agent: usize, x: &[f64]) -> f64;
    fn local_gradient(&self, agent: usize, x: &[f64], out: &mut [f64]);
    /// Lipschitz constant `L_i` of agent `i`'s gradient.
    fn local_smoothness(&self, agent: usize) -> f64;
    fn optimal_value(&self) -> f64;

    fn value(&self, x: &[f64]) -> f64 {
        (0..self.agents()).map(|i| self.local_value(i, x)).sum::<f64>() / self.agents() as f64
    }

    /// `f(x) − f*`.
    fn excess(&self, x: &[f64]) -> f64 {
        self.value(x) - self.optimal_value()
    }

    /// `L = max_i L_i`.
    fn smoothness(&self) -> f64 {
        (0..self.agents())
            .map(|i| self.local_smoothness(i))
            .fold(0.0, f64::max)
    }

    /// Stacks `∇f_i(x_i)` row by row.
    fn stacked_gradient(&self, x: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        let mut row = vec![0.0; self.dim()];
        let mut grad = vec![0.0; self.dim()];
        for i in 0..self.agents() {
            row.iter_mut().zip(x.row(i).iter()).for_each(|(r, v)| *r = *v);
            self.local_gradient(i, &row, &mut grad);
            out.row_mut(i).iter_mut().zip(&grad).for_each(|(o, g)| *o = *g);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeSettings {
    pub agents: usize,
    pub dim: usize,
    pub rho: f64,
    /// Standard deviation of the observation noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for RidgeSettings {
    fn default() -> Self {
        Self {
            agents: 20,
            dim: 10,
            rho: 0.1,
            noise: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RidgeProblem {
    /// Row `i` is `u_i`.
    pub features: DMatrix<f64>,
    pub observations: DVector<f64>,
    pub rho: f64,
    pub seed: u64,
    pub minimizer: DVector<f64>,
    pub optimal_value: f64,
    /// `max_i L_i`.
    pub smoothness: f64,
    /// Strong-convexity modulus of `f`, hence its PL constant.
    pub pl_constant: f64,
    /// `∇²f = 2((1/n) Σ u_i u_iᵀ + ρI)`.
    hessian: DMatrix<f64>,
}

impl RidgeProblem {
    /// Features `u_i ~ N(0, I)`, `v_i = u_iᵀx_true + noise·ε_i` with
    /// `x_true ~ N(0, I)`, all drawn from `settings.seed`.
    pub fn generate(settings: &RidgeSettings) -> Result<Self> {
        if settings.agents == 0 || settings.dim == 0 {
            return Err(invalid("ridge problem needs at least one agent and one dimension"));
        }
        if !(settings.noise >= 0.0 && settings.noise.is_finite()) {
            return Err(invalid(format!("noise must be nonnegative, got {}", settings.noise)));
        }
        let mut rng = stream(settings.seed, 0, 0, Role::Problem);
        let (n, p) = (settings.agents, settings.dim);
        let truth = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
        let features = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let noise = DVector::from_fn(n, |_, _| {
            let e: f64 = StandardNormal.sample(&mut rng);
            settings.noise * e
        });
        let observations = &features * &truth + noise;
        Self::from_data(features, observations, settings.rho, settings.seed)
    }

    pub fn from_data(features: DMatrix<f64>, observations: DVector<f64>, rho: f64, seed: u64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(invalid(format!("rho must be positive, got {rho}")));
        }
        if features.nrows() != observations.len() || features.nrows() == 0 || features.ncols() == 0 {
            return Err(invalid(format!(
                "need one observation per feature row (got {}x{} features, {} observations)",
                features.nrows(),
                features.ncols(),
                observations.len()
            )));
        }
        if features.iter().chain(observations.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("ridge data must be finite"));
        }
        let minimizer = ridge_solve(&features, &observations, rho);
        let (smoothness, pl_constant) = smoothness_constants(&features, rho);
        let n = features.nrows() as f64;
        let p = features.ncols();
        let hessian = (features.tr_mul(&features) / n + DMatrix::identity(p, p) * rho) * 2.0;
        let mut problem = Self {
            features,
            observations,
            rho,
            seed,
            minimizer,
            optimal_value: 0.0,
            smoothness,
            pl_constant,
            hessian,
        };
        problem.optimal_value = problem.value(problem.minimizer.as_slice());
        Ok(problem)
    }

    /// `(1/n) Σ ∇f_i(x)`.
    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let mut total = DVector::zeros(self.dim());
        let mut g = vec![0.0; self.dim()];
        for i in 0..self.agents() {
            self.local_gradient(i, x, &mut g);
            total += DVector::from_column_slice(&g);
        }
        total / self.agents() as f64
    }

    /// Writes the problem as CSV: a `# rho=...,seed=...` line, a header
    /// `u0,...,u{p-1},v`, then one row per agent.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "# rho={:.16e},seed={}", self.rho, self.seed)?;
        let mut csv = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("u{j}")).collect();
        header.push("v".into());
        csv.write_record(&header)?;
        for i in 0..self.agents() {
            let row = self
                .features
                .row(i)
                .iter()
                .chain(std::iter::once(&self.observations[i]))
                .map(|v| format!("{v:.16e}"))
                .collect::<Vec<_>>();
            csv.write_record(&row)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut text = String::new();
        let mut reader = reader;
        reader.read_to_string(&mut text)?;
        let (first, body) = text
            .split_once('\n')
            .ok_or_else(|| Error::Parse("problem CSV is empty".into()))?;
        let meta = first
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("first line must be `# rho=...,seed=...`".into()))?;
        let (mut rho, mut seed) = (None, None);
        for item in meta.split(',') {
            match item.trim().split_once('=') {
                Some(("rho", v)) => rho = v.trim().parse::<f64>().ok(),
                Some(("seed", v)) => seed = v.trim().parse::<u64>().ok(),
                _ => return Err(Error::Parse(format!("unexpected header item {item:?}"))),
            }
        }
        let (Some(rho), Some(seed)) = (rho, seed) else {
            return Err(Error::Parse("header must carry numeric rho and seed".into()));
        };
        let mut csv = csv::Reader::from_reader(body.as_bytes());
        let width = csv.headers()?.len();
        if width < 2 {
            return Err(Error::Parse("need at least one feature column and one observation".into()));
        }
        let mut values = Vec::new();
        let mut rows = 0;
        for record in csv.records() {
            let record = record?;
            for field in record.iter() {
                values.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("row {}: bad number {field:?}", rows + 1)))?,
                );
            }
            rows += 1;
        }
        let data = DMatrix::from_row_slice(rows, width, &values);
        let features = data.columns(0, width - 1).into_owned();
        let observations = data.column(width - 1).into_owned();
        Self::from_data(features, observations, rho, seed)
    }
}

impl DecentralizedObjective for RidgeProblem {
    fn agents(&self) -> usize {
        self.features.nrows()
    }

    fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn local_value(&self, agent: usize, x: &[f64]) -> f64 {
        let u = self.features.row(agent);
        let fit: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - self.observations[agent];
        fit * fit + self.rho * x.iter().map(|v| v * v).sum::<f64>()
    }

    /// `2 u_i (u_iᵀx − v_i) + 2ρx`
    fn local_gradient(&self, agent: usize, x: &[f64], out: &mut [f64]) {
        let u = self.features.row(agent);
        let fit: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - self.observations[agent];
        for ((o, ui), xi) in out.iter_mut().zip(u.iter()).zip(x) {
            *o = 2.0 * ui * fit + 2.0 * self.rho * xi;
        }
    }

    fn local_smoothness(&self, agent: usize) -> f64 {
        2.0 * self.features.row(agent).norm_squared() + 2.0 * self.rho
    }

    fn optimal_value(&self) -> f64 {
        self.optimal_value
    }

    /// `½ (x − x*)ᵀ ∇²f (x − x*)`, exact for a quadratic and free of the
    /// cancellation in `f(x) − f*`.
    fn excess(&self, x: &[f64]) -> f64 {
        let e = DVector::from_column_slice(x) - &self.minimizer;
        0.5 * e.dot(&(&self.hessian * &e))
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }
}

/// Closed-form minimizer of the average ridge objective.
pub fn ridge_solve(features: &DMatrix<f64>, observations: &DVector<f64>, rho: f64) -> DVector<f64> {
    let n = features.nrows() as f64;
    let p = features.ncols();
    let system = features.tr_mul(features) / n + DMatrix::identity(p, p) * rho;
    let rhs = features.tr_mul(observations) / n;
    system
        .cholesky()
        .expect("ridge system is positive definite for rho > 0")
        .solve(&rhs)
}

/// `(L, μ)` with `L = max_i (2‖u_i‖² + 2ρ)` and
/// `μ = 2ρ + 2 λ_min((1/n) Σ u_i u_iᵀ)`.
pub fn smoothness_constants(features: &DMatrix<f64>, rho: f64) -> (f64, f64) {
    let lipschitz = features
        .row_iter()
        .map(|u| 2.0 * u.norm_squared() + 2.0 * rho)
        .fold(0.0, f64::max);
    let gram = features.tr_mul(features) / features.nrows() as f64;
    let lambda_min = SymmetricEigen::new(gram).eigenvalues.min().max(0.0);
    (lipschitz, 2.0 * rho + 2.0 * lambda_min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RidgeProblem {
        RidgeProblem::generate(&RidgeSettings {
            agents: 5,
            dim: 3,
            rho: 0.2,
            noise: 0.1,
            seed: 4,
        })
        .unwrap()
    }

    #[test]
    fn gradient_at_zero() {
        let pb = small();
        let mut g = vec![0.0; 3];
        pb.local_gradient(2, &[0.0; 3], &mut g);
        for (j, gj) in g.iter().enumerate() {
            assert!((gj + 2.0 * pb.observations[2] * pb.features[(2, j)]).abs() < 1e-14);
        }
    }

    #[test]
    fn hand_solved_instance() {
        // (u u^T + I) x = u with u = (1, 0): diag(2, 1) x = (1, 0)
        let pb = RidgeProblem::from_data(
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::from_vec(vec![1.0]),
            1.0,
            0,
        )
        .unwrap();
        assert!((pb.minimizer[0] - 0.5).abs() < 1e-15);
        assert_eq!(pb.minimizer[1], 0.0);
    }

    #[test]
    fn zero_observations_give_zero_minimizer() {
        let pb = small();
        let z = RidgeProblem::from_data(pb.features.clone(), DVector::zeros(5), 0.2, 0).unwrap();
        assert!(z.minimizer.amax() < 1e-15);
    }

    #[test]
    fn minimizer_is_stationary() {
        let pb = small();
        assert!(pb.gradient(pb.minimizer.as_slice()).norm() < 1e-9);
        assert!(pb.excess(pb.minimizer.as_slice()).abs() < 1e-15);
    }

    #[test]
    fn smoothness_examples() {
        let e1 = DMatrix::from_fn(4, 3, |_, j| if j == 0 { 1.0 } else { 0.0 });
        let (l, mu) = smoothness_constants(&e1, 0.5);
        assert!((l - 3.0).abs() < 1e-15);
        assert!((mu - 1.0).abs() < 1e-12);
        let (l, mu) = smoothness_constants(&DMatrix::zeros(4, 3), 0.5);
        assert_eq!(l, 1.0);
        assert!((mu - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_data() {
        let pb = small();
        assert!(RidgeProblem::from_data(pb.features.clone(), pb.observations.clone(), 0.0, 0).is_err());
        assert!(RidgeProblem::from_data(pb.features.clone(), DVector::zeros(4), 0.1, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let pb = small();
        let mut buf = Vec::new();
        pb.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# rho="));
        assert!(text.lines().nth(1).unwrap() == "u0,u1,u2,v");
        let back = RidgeProblem::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.features, pb.features);
        assert_eq!(back.observations, pb.observations);
        assert_eq!((back.rho, back.seed), (pb.rho, pb.seed));
        assert!(RidgeProblem::read_csv("u0,v\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn generation_is_seeded() {
        let a = small();
        let b = small();
        assert_eq!(a.features, b.features);
        let c = RidgeProblem::generate(&RidgeSettings { seed: 5, ..RidgeSettings::default() }).unwrap();
        assert_ne!(c.features.row(0), RidgeProblem::generate(&RidgeSettings::default()).unwrap().features.row(0));
    }
}
