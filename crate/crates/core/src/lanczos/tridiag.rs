//! Implicit-shift QL eigensolver for symmetric tridiagonal matrices.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Iteration cap per eigenvalue.
pub const MAX_SWEEPS: usize = 50;

/// Eigendecomposition `T = B diag(R) Bᵀ` of the symmetric tridiagonal matrix with
/// main diagonal `diag` and off-diagonal `off` (`off.len() == diag.len() - 1`).
///
/// Eigenvalues come back in descending order; each column of `B` has its first
/// non-negligible entry made non-negative.
pub fn tridiag_eigendecompose(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Matrix)> {
    let n = diag.len();
    if n == 0 {
        return Ok((Vec::new(), Matrix::zeros(0, 0)));
    }
    if off.len() + 1 != n {
        return Err(Error::shape(
            "tridiag_eigendecompose",
            format!("{} off-diagonal entries", n - 1),
            off.len().to_string(),
        ));
    }
    if diag.iter().chain(off).any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("tridiagonal entries must be finite".into()));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z = Matrix::identity(n);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_SWEEPS {
                return Err(Error::NoConvergence {
                    index: l,
                    sweeps: MAX_SWEEPS,
                });
            }
            // Wilkinson-style shift from the leading 2x2 block
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let zf = z[(k, i + 1)];
                    let zi = z[(k, i)];
                    z[(k, i + 1)] = s * zi + c * zf;
                    z[(k, i)] = c * zi - s * zf;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let values: Vec<f64> = order.iter().map(|&k| d[k]).collect();
    let mut vectors = Matrix::from_fn(n, n, |i, j| z[(i, order[j])]);
    for j in 0..n {
        if first_significant_is_negative(&vectors.column(j)) {
            for i in 0..n {
                vectors[(i, j)] = -vectors[(i, j)];
            }
        }
    }
    Ok((values, vectors))
}

/// Sign convention shared by every eigensolver in the crate: the first entry whose
/// magnitude exceeds `1e-10 · max|v|` must be non-negative.
pub(crate) fn first_significant_is_negative(v: &[f64]) -> bool {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    v.iter().find(|x| x.abs() > 1e-10 * scale).is_some_and(|&x| x < 0.0)
}

/// Dense `K×K` matrix from diagonal and off-diagonal.
pub fn tridiagonal_matrix(diag: &[f64], off: &[f64]) -> Matrix {
    let n = diag.len();
    let mut t = Matrix::diag(diag);
    for (i, &b) in off.iter().enumerate().take(n.saturating_sub(1)) {
        t[(i, i + 1)] = b;
        t[(i + 1, i)] = b;
    }
    t
}
