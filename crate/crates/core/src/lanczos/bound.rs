//! A-priori bound on the Frobenius error of the K-step Lanczos approximation.

use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, Matrix};
use crate::spectral::dense_eigensystem;

use super::LanczosDecomposition;

/// Chebyshev polynomial of the first kind `T_m(x)` by the three-term recurrence.
pub fn chebyshev_t(m: usize, x: f64) -> f64 {
    match m {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for _ in 1..m {
                let next = 2.0 * x * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `‖S - Q T Qᵀ‖_F²` for a dense symmetric `s`.
pub fn lowrank_error_sq(s: &Matrix, d: &LanczosDecomposition) -> f64 {
    let q = &d.lanczos_vectors;
    let approx = q.matmul(&d.tridiagonal()).matmul_t(q);
    let diff = s.sub(&approx);
    diff.as_slice().iter().map(|x| x * x).sum()
}

/// Upper bound on `‖S - QTQᵀ‖_F²` after `k` Lanczos steps from start vector `v`.
///
/// `j` is 1-based with `1 < j < N` and `k > j`. Eigenvalues are sorted so that
/// `λ_1 ≥ … ≥ λ_N`. Returns [`Error::DegenerateSpectrum`] whenever one of the
/// denominators vanishes: the bound is undefined there.
pub fn bound_theorem1(s: &Matrix, v: &[f64], k: usize, j: usize) -> Result<f64> {
    let n = s.rows();
    if s.cols() != n || v.len() != n {
        return Err(Error::shape(
            "bound_theorem1",
            format!("{n}x{n} matrix and length-{n} vector"),
            format!("{}x{} and {}", s.rows(), s.cols(), v.len()),
        ));
    }
    if !(1 < j && j < n) {
        return Err(Error::InvalidArgument(format!("need 1 < j < N, got j={j}, N={n}")));
    }
    if k <= j {
        return Err(Error::InvalidArgument(format!("need K > j, got K={k}, j={j}")));
    }
    let vnorm = norm2(v);
    if !(vnorm > 0.0) {
        return Err(Error::ZeroStartVector);
    }
    let es = dense_eigensystem(s)?;
    let lam = &es.lambda;
    let scale = lam.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-12 * scale;
    let lam_n = lam[n - 1];

    // coefficients of v in the eigenbasis, normalized
    let coeff: Vec<f64> = (0..n).map(|i| dot(&es.u.column(i), v) / vnorm).collect();

    // Π_{k<j} (λ_k - λ_N)/(λ_k - λ_j), shared by every term of the first sum
    let mut product = 1.0;
    for kk in 0..j - 1 {
        let denom = lam[kk] - lam[j - 1];
        if denom.abs() <= tol {
            return Err(Error::DegenerateSpectrum(format!("λ_{} = λ_{j}", kk + 1)));
        }
        product *= (lam[kk] - lam_n) / denom;
    }

    let mut head = 0.0;
    let mut captured = 0.0;
    for i in 0..j {
        captured += coeff[i] * coeff[i];
        let sin = (1.0 - captured).max(0.0).sqrt();
        let cos = coeff[i].abs();
        if cos <= 1e-14 {
            return Err(Error::DegenerateSpectrum(format!(
                "start vector orthogonal to u_{}",
                i + 1
            )));
        }
        let gap = lam[i + 1] - lam_n;
        if gap.abs() <= tol {
            return Err(Error::DegenerateSpectrum(format!("λ_{} = λ_N", i + 2)));
        }
        let gamma = (lam[i] - lam[i + 1]) / gap;
        let cheb = chebyshev_t(k - (i + 1), 1.0 + 2.0 * gamma);
        let ratio = sin * product / (cos * cheb);
        head += lam[i] * lam[i] * ratio * ratio;
    }
    let tail: f64 = lam[j..].iter().map(|l| l * l).sum();
    Ok(head + tail)
}
