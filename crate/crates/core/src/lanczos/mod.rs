//! K-step Lanczos tridiagonalization and the low-rank operators built on it.
//!
//! [`lanczos_decompose`] runs the three-term recurrence on a symmetric sparse
//! operator, stops on breakdown (`β_j < ε`), diagonalizes the resulting tridiagonal
//! `T = B R Bᵀ` in-repo and returns the Ritz pairs `V = QB`, `R`. The Ritz pairs give
//! the low-rank approximation `S ≈ V R Vᵀ` and cheap powers `Sᵗ ≈ V Rᵗ Vᵀ`.

mod bound;
mod tridiag;

pub use bound::{bound_theorem1, chebyshev_t, lowrank_error_sq};
pub(crate) use tridiag::first_significant_is_negative;
pub use tridiag::{tridiag_eigendecompose, tridiagonal_matrix, MAX_SWEEPS};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::OperatorKind;
use crate::matrix::{dot, norm2, Matrix};
use crate::sparse::SparseMatrix;

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_SEED: u64 = 0;

/// Tolerance for the symmetry check on the input operator.
const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartVector {
    SeededRandomUnit(u64),
    Given(Vec<f64>),
    UniformUnit,
}

impl StartVector {
    /// Unit-norm start vector of length `n`.
    pub fn materialize(&self, n: usize) -> Result<Vec<f64>> {
        let v: Vec<f64> = match self {
            StartVector::SeededRandomUnit(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
            }
            StartVector::Given(v) => {
                if v.len() != n {
                    return Err(Error::shape("start vector", n.to_string(), v.len().to_string()));
                }
                v.clone()
            }
            StartVector::UniformUnit => vec![1.0; n],
        };
        let norm = norm2(&v);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroStartVector);
        }
        Ok(v.into_iter().map(|x| x / norm).collect())
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            StartVector::SeededRandomUnit(s) => Some(*s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosOptions {
    pub k: usize,
    pub epsilon: f64,
    pub reorthogonalize: bool,
    pub start: StartVector,
}

impl LanczosOptions {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            epsilon: DEFAULT_EPSILON,
            reorthogonalize: false,
            start: StartVector::SeededRandomUnit(DEFAULT_SEED),
        }
    }

    pub fn reorthogonalized(mut self, on: bool) -> Self {
        self.reorthogonalize = on;
        self
    }

    pub fn with_start(mut self, start: StartVector) -> Self {
        self.start = start;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("Lanczos needs K >= 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "breakdown tolerance must be > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Output of K-step Lanczos plus the Ritz step.
#[derive(Debug, Clone, PartialEq)]
pub struct LanczosDecomposition {
    /// `Q`, N×K'.
    pub lanczos_vectors: Matrix,
    /// `γ_1..γ_K'`.
    pub diagonal: Vec<f64>,
    /// `β_1..β_{K'-1}`.
    pub off_diagonal: Vec<f64>,
    /// `V = QB`, N×K'.
    pub ritz_vectors: Matrix,
    /// Diagonal of `R`, descending.
    pub ritz_values: Vec<f64>,
    pub requested_steps: usize,
    pub steps_completed: usize,
    pub breakdown: bool,
    /// Seed of the start vector, when it was seeded.
    pub seed: Option<u64>,
    /// Ritz values are clamped to `[-1, 1]` before powering (affinity operators only).
    pub clamp_ritz: bool,
}

impl LanczosDecomposition {
    pub fn dim(&self) -> usize {
        self.lanczos_vectors.rows()
    }

    pub fn tridiagonal(&self) -> Matrix {
        tridiagonal_matrix(&self.diagonal, &self.off_diagonal)
    }

    /// Ritz values with clamping applied when the operator is an affinity matrix.
    pub fn effective_ritz_values(&self) -> Vec<f64> {
        if self.clamp_ritz {
            self.ritz_values.iter().map(|r| r.clamp(-1.0, 1.0)).collect()
        } else {
            self.ritz_values.clone()
        }
    }

    /// Largest off-diagonal entry of `QᵀQ` in absolute value.
    pub fn orthogonality_drift(&self) -> f64 {
        let gram = self.lanczos_vectors.t_matmul(&self.lanczos_vectors);
        let k = gram.rows();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    worst = worst.max(gram[(i, j)].abs());
                }
            }
        }
        worst
    }
}

pub fn lanczos_decompose(s: &SparseMatrix, opts: &LanczosOptions) -> Result<LanczosDecomposition> {
    opts.validate()?;
    let n = s.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("operator has dimension 0".into()));
    }
    s.check_symmetric(SYMMETRY_TOL)?;
    let steps = opts.k.min(n);
    let mut q: Vec<Vec<f64>> = vec![opts.start.materialize(n)?];
    let mut gamma = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut breakdown = false;

    for j in 0..steps {
        let mut z = s.spmv(&q[j])?;
        let g = dot(&q[j], &z);
        gamma.push(g);
        let beta_prev = if j > 0 { beta[j - 1] } else { 0.0 };
        for (i, zi) in z.iter_mut().enumerate() {
            *zi -= g * q[j][i];
            if j > 0 {
                *zi -= beta_prev * q[j - 1][i];
            }
        }
        if opts.reorthogonalize {
            for qi in &q[..j] {
                let c = dot(&z, qi);
                for (zk, qk) in z.iter_mut().zip(qi) {
                    *zk -= c * qk;
                }
            }
        }
        let b = norm2(&z);
        if b < opts.epsilon {
            breakdown = true;
            break;
        }
        if j + 1 == steps {
            break;
        }
        beta.push(b);
        q.push(z.into_iter().map(|x| x / b).collect());
    }

    let k_done = gamma.len();
    beta.truncate(k_done.saturating_sub(1));
    let mut qm = Matrix::zeros(n, k_done);
    for (j, col) in q.iter().take(k_done).enumerate() {
        qm.set_column(j, col);
    }
    let (ritz_values, b) = tridiag_eigendecompose(&gamma, &beta)?;
    let mut v = qm.matmul(&b);
    for j in 0..k_done {
        if first_significant_is_negative(&v.column(j)) {
            for i in 0..n {
                v[(i, j)] = -v[(i, j)];
            }
        }
    }

    Ok(LanczosDecomposition {
        lanczos_vectors: qm,
        diagonal: gamma,
        off_diagonal: beta,
        ritz_vectors: v,
        ritz_values,
        requested_steps: opts.k,
        steps_completed: k_done,
        breakdown,
        seed: opts.start.seed(),
        clamp_ritz: matches!(s.kind(), Some(k) if k.kind == OperatorKind::Affinity),
    })
}

/// `V diag(R) Vᵀ`.
pub fn lowrank_reconstruct(d: &LanczosDecomposition) -> Matrix {
    let v = &d.ritz_vectors;
    v.matmul(&Matrix::diag(&d.ritz_values)).matmul_t(v)
}

/// `V diag(R)ᵗ Vᵀ x`, never forming the N×N product.
pub fn lowrank_power(d: &LanczosDecomposition, t: u32, x: &Matrix) -> Result<Matrix> {
    if x.rows() != d.dim() {
        return Err(Error::shape(
            "lowrank_power",
            format!("{} rows", d.dim()),
            format!("{} rows", x.rows()),
        ));
    }
    let powers: Vec<f64> = d.effective_ritz_values().iter().map(|r| r.powi(t as i32)).collect();
    let mut proj = d.ritz_vectors.t_matmul(x);
    for (k, p) in powers.iter().enumerate() {
        for c in proj.row_mut(k) {
            *c *= p;
        }
    }
    Ok(d.ritz_vectors.matmul(&proj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_operator, Graph, LaplacianKind};

    fn swap() -> SparseMatrix {
        SparseMatrix::from_triplets(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap()
    }

    #[test]
    fn identity_breaks_down_after_one_step() {
        let v = vec![0.6, 0.0, 0.8];
        let opts = LanczosOptions::new(3).with_start(StartVector::Given(v.clone()));
        let d = lanczos_decompose(&SparseMatrix::identity(3), &opts).unwrap();
        assert!(d.breakdown);
        assert_eq!(d.steps_completed, 1);
        assert_eq!(d.diagonal, vec![1.0]);
        assert_eq!(d.ritz_values, vec![1.0]);
        assert_eq!(d.ritz_vectors.column(0), v);
    }

    #[test]
    fn swap_matrix_two_steps_exact() {
        let opts = LanczosOptions::new(2).with_start(StartVector::Given(vec![1.0, 0.0]));
        let d = lanczos_decompose(&swap(), &opts).unwrap();
        assert_eq!(d.lanczos_vectors, Matrix::identity(2));
        assert_eq!(d.tridiagonal(), swap().to_dense());
        assert!((d.ritz_values[0] - 1.0).abs() < 1e-15);
        assert!((d.ritz_values[1] + 1.0).abs() < 1e-15);
        assert!(d.breakdown);
    }

    #[test]
    fn swap_power_two_is_identity() {
        let opts = LanczosOptions::new(2).with_start(StartVector::Given(vec![1.0, 0.0]));
        let d = lanczos_decompose(&swap(), &opts).unwrap();
        let p = lowrank_power(&d, 2, &Matrix::identity(2)).unwrap();
        assert!(p.max_abs_diff(&Matrix::identity(2)) < 1e-15);
        let p1 = lowrank_power(&d, 1, &Matrix::identity(2)).unwrap();
        assert!(p1.max_abs_diff(&lowrank_reconstruct(&d)) < 1e-15);
    }

    #[test]
    fn rank_one_reconstruction_is_exact() {
        let u = [0.5, 0.5, 0.5, 0.5];
        let s = Matrix::from_fn(4, 4, |i, j| u[i] * u[j]);
        let opts = LanczosOptions::new(2).with_start(StartVector::Given(u.to_vec()));
        let d = lanczos_decompose(&SparseMatrix::from_dense(&s), &opts).unwrap();
        assert!(d.breakdown);
        assert_eq!(d.steps_completed, 1);
        assert!(lowrank_reconstruct(&d).max_abs_diff(&s) < 1e-15);

        // A start vector outside the range spans a two-dimensional Krylov space.
        let opts = LanczosOptions::new(3).with_start(StartVector::Given(vec![1.0, 0.0, 0.0, 0.0]));
        let d = lanczos_decompose(&SparseMatrix::from_dense(&s), &opts).unwrap();
        assert!(d.breakdown);
        assert_eq!(d.steps_completed, 2);
        assert!(lowrank_reconstruct(&d).max_abs_diff(&s) < 1e-15);
    }

    #[test]
    fn one_step_on_identity_is_outer_product() {
        let v = vec![0.0, 1.0, 0.0];
        let opts = LanczosOptions::new(1).with_start(StartVector::Given(v.clone()));
        let d = lanczos_decompose(&SparseMatrix::identity(3), &opts).unwrap();
        let want = Matrix::from_fn(3, 3, |i, j| v[i] * v[j]);
        assert_eq!(lowrank_reconstruct(&d), want);
    }

    #[test]
    fn k_beyond_n_is_capped() {
        let g = Graph::new(3, [(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        let s = build_operator(&g, LaplacianKind::affinity(true)).unwrap();
        let d = lanczos_decompose(&s, &LanczosOptions::new(10)).unwrap();
        assert!(d.steps_completed <= 3);
        assert_eq!(d.requested_steps, 10);
        assert!(d.clamp_ritz);
    }

    #[test]
    fn invalid_inputs() {
        let s = SparseMatrix::identity(2);
        let zero = LanczosOptions::new(2).with_start(StartVector::Given(vec![0.0, 0.0]));
        assert_eq!(lanczos_decompose(&s, &zero).unwrap_err(), Error::ZeroStartVector);
        assert!(lanczos_decompose(&s, &LanczosOptions::new(0)).is_err());
        assert!(lanczos_decompose(&s, &LanczosOptions::new(2).with_epsilon(0.0)).is_err());
        let asym = SparseMatrix::from_triplets(2, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            lanczos_decompose(&asym, &LanczosOptions::new(2)),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn seeded_start_is_recorded_and_reproducible() {
        let g = Graph::new(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let s = build_operator(&g, LaplacianKind::affinity(false)).unwrap();
        let opts = LanczosOptions::new(3).with_start(StartVector::SeededRandomUnit(99));
        let a = lanczos_decompose(&s, &opts).unwrap();
        let b = lanczos_decompose(&s, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seed, Some(99));
    }
}
