//! Classical spectral graph operators: graph Fourier transform, Chebyshev and
//! polynomial filters, diffusion maps and frequency representations.
//!
//! Everything here works from a full eigendecomposition and is meant for
//! small graphs, where it doubles as the dense reference for the Lanczos path.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{degree_matrix, Graph};
use crate::lanczos::first_significant_is_negative;
use crate::matrix::Matrix;
use crate::sparse::SparseMatrix;

/// Largest dimension accepted by the dense eigensolver.
pub const DENSE_LIMIT: usize = 1024;

/// Columns of `u` are eigenvectors, sorted by descending `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub u: Matrix,
    pub lambda: Vec<f64>,
}

pub fn dense_eigensystem(s: &Matrix) -> Result<EigenSystem> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::shape(
            "dense_eigensystem",
            "square",
            format!("{}x{}", n, s.cols()),
        ));
    }
    if n > DENSE_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "dense eigensystem limited to N <= {DENSE_LIMIT}, got {n}"
        )));
    }
    if !s.is_finite() {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let eig = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, 10_000).ok_or(Error::NoConvergence {
        index: 0,
        sweeps: 10_000,
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut u = Matrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    for j in 0..n {
        if first_significant_is_negative(&u.column(j)) {
            for i in 0..n {
                u[(i, j)] = -u[(i, j)];
            }
        }
    }
    Ok(EigenSystem { u, lambda })
}

fn check_rows(op: &'static str, n: usize, x: &Matrix) -> Result<()> {
    if x.rows() != n {
        return Err(Error::shape(op, format!("{n} rows"), format!("{} rows", x.rows())));
    }
    Ok(())
}

/// `Y = UᵀX`.
pub fn graph_fourier(es: &EigenSystem, x: &Matrix) -> Result<Matrix> {
    check_rows("graph_fourier", es.u.rows(), x)?;
    Ok(es.u.t_matmul(x))
}

/// `X = UY`.
pub fn inverse_graph_fourier(es: &EigenSystem, y: &Matrix) -> Result<Matrix> {
    check_rows("inverse_graph_fourier", es.u.cols(), y)?;
    Ok(es.u.matmul(y))
}

/// `X̂ = Λᵗ UᵀX`.
pub fn frequency_representation(es: &EigenSystem, x: &Matrix, t: u32) -> Result<Matrix> {
    let mut y = graph_fourier(es, x)?;
    for (k, lam) in es.lambda.iter().enumerate() {
        let p = lam.powi(t as i32);
        for c in y.row_mut(k) {
            *c *= p;
        }
    }
    Ok(y)
}

/// Chebyshev filter `Σ_t c_t T_t(L̃) X` with `L̃ = 2L/λ_max − I`, by the three-term recursion.
pub fn chebyshev_filter(l: &SparseMatrix, x: &Matrix, coeffs: &[f64], lambda_max: f64) -> Result<Matrix> {
    if coeffs.is_empty() {
        return Err(Error::InvalidArgument(
            "chebyshev_filter needs at least one coefficient".into(),
        ));
    }
    if !(lambda_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda_max must be > 0, got {lambda_max}"
        )));
    }
    check_rows("chebyshev_filter", l.dim(), x)?;
    let scaled = |m: &Matrix| -> Result<Matrix> {
        let lx = l.spmm(m)?;
        Ok(lx.scale(2.0 / lambda_max).sub(m))
    };
    let mut out = x.scale(coeffs[0]);
    if coeffs.len() == 1 {
        return Ok(out);
    }
    let mut prev = x.clone();
    let mut cur = scaled(x)?;
    out.axpy(coeffs[1], &cur);
    for &c in &coeffs[2..] {
        let mut next = scaled(&cur)?.scale(2.0);
        next.axpy(-1.0, &prev);
        out.axpy(c, &next);
        prev = cur;
        cur = next;
    }
    Ok(out)
}

/// Largest eigenvalue of a symmetric operator: dense for small `N`, power iteration otherwise.
pub fn estimate_lambda_max(l: &SparseMatrix) -> Result<f64> {
    let n = l.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("empty operator".into()));
    }
    if n <= 256 {
        return Ok(dense_eigensystem(&l.to_dense())?.lambda[0]);
    }
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.01).collect();
    let mut est = 0.0;
    for _ in 0..1000 {
        let w = l.spmv(&v)?;
        let norm = crate::matrix::norm2(&w);
        if norm == 0.0 {
            return Ok(0.0);
        }
        let next = crate::matrix::dot(&v, &w) / crate::matrix::dot(&v, &v);
        v = w.into_iter().map(|x| x / norm).collect();
        if (next - est).abs() <= 1e-10 * next.abs().max(1.0) {
            return Ok(next);
        }
        est = next;
    }
    Ok(est)
}

/// `Σ_{t<τ} Sᵗ X W_t` by repeated sparse products.
pub fn polynomial_filter(s: &SparseMatrix, x: &Matrix, weights: &[Matrix]) -> Result<Matrix> {
    check_rows("polynomial_filter", s.dim(), x)?;
    let first = weights
        .first()
        .ok_or_else(|| Error::InvalidArgument("polynomial_filter needs at least one weight".into()))?;
    let out_cols = first.cols();
    for w in weights {
        if w.shape() != (x.cols(), out_cols) {
            return Err(Error::shape(
                "polynomial_filter",
                format!("{}x{}", x.cols(), out_cols),
                format!("{}x{}", w.rows(), w.cols()),
            ));
        }
    }
    let mut out = Matrix::zeros(x.rows(), out_cols);
    let mut power = x.clone();
    for (t, w) in weights.iter().enumerate() {
        if t > 0 {
            power = s.spmm(&power)?;
        }
        out.add_assign(&power.matmul(w));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionMap {
    /// Right eigenvectors of `P = D⁻¹A`, `ψ_l = D^{-1/2} u_l`, one per column.
    pub psi: Matrix,
    pub lambda: Vec<f64>,
    pub t: u32,
    /// `Φ_t`, one row per node.
    pub embedding: Matrix,
}

/// Diffusion map of `g` at scale `t`, keeping the `top` largest eigenpairs (all when `None`).
///
/// Eigenpairs come from the symmetric `S = D^{-1/2} A D^{-1/2}` and are conjugated
/// back, so no non-symmetric eigensolver is involved.
pub fn diffusion_map(g: &Graph, t: u32, top: Option<usize>) -> Result<DiffusionMap> {
    let deg = degree_matrix(g, false);
    if let Some(node) = deg.iter().position(|&d| d == 0.0) {
        return Err(Error::ZeroDegreeNode { node });
    }
    let n = g.num_nodes();
    let m = top.unwrap_or(n).min(n);
    if m == 0 {
        return Err(Error::InvalidArgument(
            "diffusion map needs at least one eigenpair".into(),
        ));
    }
    let s = crate::graph::build_operator(g, crate::graph::LaplacianKind::affinity(false))?;
    let es = dense_eigensystem(&s.to_dense())?;
    let psi = Matrix::from_fn(n, m, |i, l| es.u[(i, l)] / deg[i].sqrt());
    let lambda: Vec<f64> = es.lambda[..m].to_vec();
    let embedding = Matrix::from_fn(n, m, |i, l| lambda[l].powi(t as i32) * psi[(i, l)]);
    Ok(DiffusionMap {
        psi,
        lambda,
        t,
        embedding,
    })
}

/// `‖Φ_t(i) − Φ_t(j)‖²`.
pub fn diffusion_distance(dm: &DiffusionMap, i: usize, j: usize) -> Result<f64> {
    let n = dm.embedding.rows();
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!("node index out of range 0..{n}")));
    }
    Ok(dm
        .embedding
        .row(i)
        .iter()
        .zip(dm.embedding.row(j))
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigensystem_of_small_matrices() {
        let es = dense_eigensystem(&Matrix::identity(2)).unwrap();
        assert_eq!(es.lambda, vec![1.0, 1.0]);
        let es = dense_eigensystem(&Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])).unwrap();
        assert!((es.lambda[0] - 1.0).abs() < 1e-15 && (es.lambda[1] + 1.0).abs() < 1e-15);
        assert!(es.u[(0, 0)] > 0.0 && es.u[(0, 1)] > 0.0);
    }

    #[test]
    fn fourier_of_identity_basis_and_eigenvector() {
        let es = EigenSystem {
            u: Matrix::identity(3),
            lambda: vec![1.0, 0.5, 0.0],
        };
        let x = Matrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64);
        assert_eq!(graph_fourier(&es, &x).unwrap(), x);

        let s = Matrix::from_rows(&[vec![2.0, 1.0, 0.0], vec![1.0, 2.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let es = dense_eigensystem(&s).unwrap();
        let u1 = Matrix::column_vector(&es.u.column(0));
        let y = graph_fourier(&es, &u1).unwrap();
        assert!(y.max_abs_diff(&Matrix::column_vector(&[1.0, 0.0, 0.0])) < 1e-12);
    }

    #[test]
    fn frequency_representation_at_zero_scale_is_fourier() {
        let s = Matrix::from_rows(&[vec![0.2, 0.5], vec![0.5, -0.1]]);
        let es = dense_eigensystem(&s).unwrap();
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]);
        assert_eq!(
            frequency_representation(&es, &x, 0).unwrap(),
            graph_fourier(&es, &x).unwrap()
        );
        // the smallest-magnitude eigenvector is suppressed at large t
        let un = Matrix::column_vector(&es.u.column(1));
        let f = frequency_representation(&es, &un, 60).unwrap();
        assert!(f.max_abs() < 1e-6);
    }

    #[test]
    fn chebyshev_identity_and_first_order_terms() {
        let g = Graph::new(2, [(0, 1, 1.0)]).unwrap();
        let l = crate::graph::build_operator(
            &g,
            crate::graph::LaplacianKind::new(crate::graph::OperatorKind::SymmetricNormalized, false),
        )
        .unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0]]);
        assert_eq!(chebyshev_filter(&l, &x, &[1.0], 2.0).unwrap(), x);
        let got = chebyshev_filter(&l, &x, &[0.0, 1.0], 2.0).unwrap();
        let want = l.to_dense().sub(&Matrix::identity(2)).matmul(&x);
        assert!(got.max_abs_diff(&want) < 1e-15);
        assert!(chebyshev_filter(&l, &x, &[], 2.0).is_err());
        assert!(chebyshev_filter(&l, &x, &[1.0], 0.0).is_err());
    }

    #[test]
    fn polynomial_filter_trivial_cases() {
        let s = SparseMatrix::from_triplets(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let w0 = Matrix::from_rows(&[vec![1.0], vec![-1.0]]);
        assert_eq!(
            polynomial_filter(&s, &x, std::slice::from_ref(&w0)).unwrap(),
            x.matmul(&w0)
        );
        let zeros = vec![Matrix::zeros(2, 1); 3];
        assert_eq!(polynomial_filter(&s, &x, &zeros).unwrap(), Matrix::zeros(2, 1));
        assert!(polynomial_filter(&s, &x, &[Matrix::zeros(3, 1)]).is_err());
    }

    #[test]
    fn diffusion_on_single_edge() {
        let g = Graph::new(2, [(0, 1, 1.0)]).unwrap();
        let dm = diffusion_map(&g, 1, None).unwrap();
        assert!((dm.lambda[0] - 1.0).abs() < 1e-15 && (dm.lambda[1] + 1.0).abs() < 1e-15);
        assert!((diffusion_distance(&dm, 0, 1).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(diffusion_distance(&dm, 1, 1).unwrap(), 0.0);
        assert!(diffusion_distance(&dm, 0, 2).is_err());
    }

    #[test]
    fn diffusion_requires_positive_degrees() {
        let g = Graph::new(3, [(0, 1, 1.0)]).unwrap();
        assert_eq!(
            diffusion_map(&g, 1, None).unwrap_err(),
            Error::ZeroDegreeNode { node: 2 }
        );
    }

    #[test]
    fn diffusion_coordinates_decay_on_non_bipartite_graph() {
        // triangle plus a pendant: connected, has an odd cycle
        let g = Graph::new(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (2, 3, 1.0)]).unwrap();
        let dm = diffusion_map(&g, 200, None).unwrap();
        for i in 0..4 {
            for l in 1..4 {
                assert!(dm.embedding[(i, l)].abs() < 1e-6);
            }
        }
        let truncated = diffusion_map(&g, 3, Some(2)).unwrap();
        assert_eq!(truncated.embedding.cols(), 2);
    }
}
