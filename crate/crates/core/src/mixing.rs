//! Row- and column-stochastic mixing matrices.
//!
//! The pull matrix `R` is row-stochastic: agent `i` averages decision
//! variables over its in-neighbourhood. The push matrix `C` is
//! column-stochastic: agent `j` splits its tracker among its
//! out-neighbourhood. Both carry a Perron vector normalized to sum to `n`:
//! the left eigenvector `u_R` of `R` and the right eigenvector `u_C` of `C`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::digraph::Digraph;
use crate::error::{invalid, Error, Result};
use crate::rng::{stream, Role};

pub const STOCHASTIC_TOL: f64 = 1e-12;
pub const EIGEN_TOL: f64 = 1e-9;
const POWER_RESIDUAL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightScheme {
    /// `1 / (degree + 1)` over each neighbourhood.
    Uniform,
    /// Positive random weights drawn from `seed`, then renormalized.
    Perturbed { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct MixingPair {
    /// Row-stochastic `R`.
    pub pull: DMatrix<f64>,
    /// Column-stochastic `C`.
    pub push: DMatrix<f64>,
    /// Left Perron vector of `R`, `u_R^T 1 = n`.
    pub pull_vector: DVector<f64>,
    /// Right Perron vector of `C`, `u_C^T 1 = n`.
    pub push_vector: DVector<f64>,
    /// Support of `R` (self-loops included).
    pub pull_graph: Digraph,
    /// Support of `C` (self-loops included).
    pub push_graph: Digraph,
}

impl MixingPair {
    pub fn agents(&self) -> usize {
        self.pull.nrows()
    }

    /// `u_R^T u_C`.
    pub fn perron_overlap(&self) -> f64 {
        self.pull_vector.dot(&self.push_vector)
    }

    /// Verifies stochasticity, support, eigenvector and overlap invariants.
    pub fn check(&self) -> Result<()> {
        let n = self.agents();
        let bad = |what: String| Error::AssumptionViolation {
            assumption: "mixing matrices",
            detail: what,
        };
        for i in 0..n {
            let row: f64 = self.pull.row(i).sum();
            if (row - 1.0).abs() >= STOCHASTIC_TOL {
                return Err(bad(format!("row {i} of R sums to {row}")));
            }
            let col: f64 = self.push.column(i).sum();
            if (col - 1.0).abs() >= STOCHASTIC_TOL {
                return Err(bad(format!("column {i} of C sums to {col}")));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let (r, c) = (self.pull[(i, j)], self.push[(i, j)]);
                if r < 0.0 || c < 0.0 {
                    return Err(bad(format!("negative weight at ({i}, {j})")));
                }
                if r > 0.0 && !self.pull_graph.contains_edge(j, i) {
                    return Err(bad(format!("R[{i},{j}] > 0 without edge {j} -> {i}")));
                }
                if c > 0.0 && !self.push_graph.contains_edge(j, i) {
                    return Err(bad(format!("C[{i},{j}] > 0 without edge {j} -> {i}")));
                }
            }
        }
        let left = self.pull.tr_mul(&self.pull_vector) - &self.pull_vector;
        if left.amax() >= EIGEN_TOL {
            return Err(bad(format!("u_R^T R != u_R^T (residual {:e})", left.amax())));
        }
        let right = &self.push * &self.push_vector - &self.push_vector;
        if right.amax() >= EIGEN_TOL {
            return Err(bad(format!("C u_C != u_C (residual {:e})", right.amax())));
        }
        let nf = n as f64;
        if (self.pull_vector.sum() - nf).abs() >= EIGEN_TOL
            || (self.push_vector.sum() - nf).abs() >= EIGEN_TOL
        {
            return Err(bad("Perron vectors are not normalized to n".into()));
        }
        if self.pull_vector.min() < 0.0 || self.push_vector.min() < 0.0 {
            return Err(bad("Perron vector has a negative entry".into()));
        }
        if self.perron_overlap() <= 0.0 {
            return Err(bad("u_R^T u_C is not positive".into()));
        }
        Ok(())
    }
}

/// Builds `R` over `pull_graph` and `C` over `push_graph` (self-loops are
/// added to both) and computes their Perron vectors.
///
/// Fails when no node is simultaneously a spanning-tree root of the pull
/// graph and of the reversed push graph.
pub fn build_mixing(pull_graph: &Digraph, push_graph: &Digraph, weights: WeightScheme) -> Result<MixingPair> {
    let n = pull_graph.node_count();
    if n == 0 || push_graph.node_count() != n {
        return Err(invalid(format!(
            "graphs must be non-empty and of equal size (got {n} and {})",
            push_graph.node_count()
        )));
    }
    let pull_graph = pull_graph.with_self_loops();
    let push_graph = push_graph.with_self_loops();

    let pull_roots = pull_graph.root_set();
    let push_roots = push_graph.reversed().root_set();
    if pull_roots.intersection(&push_roots).next().is_none() {
        return Err(Error::AssumptionViolation {
            assumption: "root-set intersection",
            detail: format!(
                "root sets of G_R {pull_roots:?} and G_C^T {push_roots:?} do not intersect"
            ),
        });
    }

    let mut pull = DMatrix::zeros(n, n);
    let mut push = DMatrix::zeros(n, n);
    let mut rng = match weights {
        WeightScheme::Uniform => None,
        WeightScheme::Perturbed { seed } => Some(stream(seed, 0, 0, Role::Weights)),
    };
    let mut draw = |count: usize| -> Vec<f64> {
        match rng.as_mut() {
            None => vec![1.0; count],
            Some(r) => (0..count).map(|_| 0.5 + r.random::<f64>()).collect(),
        }
    };
    for i in 0..n {
        let sources: Vec<usize> = pull_graph.in_neighbors(i).collect();
        let w = draw(sources.len());
        let total: f64 = w.iter().sum();
        for (&j, wj) in sources.iter().zip(&w) {
            pull[(i, j)] = wj / total;
        }
    }
    for j in 0..n {
        let targets: Vec<usize> = push_graph.out_neighbors(j).collect();
        let w = draw(targets.len());
        let total: f64 = w.iter().sum();
        for (&i, wi) in targets.iter().zip(&w) {
            push[(i, j)] = wi / total;
        }
    }

    let pull_vector = perron_vector(&pull.transpose())?;
    let push_vector = perron_vector(&push)?;
    let pair = MixingPair {
        pull,
        push,
        pull_vector,
        push_vector,
        pull_graph,
        push_graph,
    };
    pair.check()?;
    Ok(pair)
}

/// Fixed point of `v -> M v` for a nonnegative matrix with eigenvalue 1 and
/// unit column sums (a column-stochastic matrix), normalized to sum to `n`.
fn perron_vector(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = m.nrows();
    let mut v = DVector::from_element(n, 1.0);
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_MAX_ITERS {
        let mut next = m * &v;
        let s = next.sum();
        next *= n as f64 / s;
        residual = (&next - &v).amax();
        v = next;
        if residual < POWER_RESIDUAL {
            return Ok(v);
        }
    }
    Err(Error::NotConverged {
        iterations: POWER_MAX_ITERS,
        residual,
    })
}
