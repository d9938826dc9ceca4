#![allow(dead_code)]

use lanczos_net::{Graph, Matrix, SparseMatrix};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-ish orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let g = gaussian_matrix(n, n, rng);
    let q = DMatrix::from_row_slice(n, n, g.as_slice()).qr().q();
    Matrix::from_fn(n, n, |i, j| q[(i, j)])
}

/// `U diag(lams) Uᵀ` with a random orthogonal `U`, symmetrized exactly.
pub fn symmetric_with_spectrum(lams: &[f64], rng: &mut ChaCha8Rng) -> Matrix {
    let n = lams.len();
    let u = random_orthogonal(n, rng);
    let s = u.matmul(&Matrix::diag(lams)).matmul_t(&u);
    Matrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]))
}

/// Distinct eigenvalues spread over `[-1, 1]`.
pub fn distinct_spectrum(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut l: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        l.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if l.windows(2).all(|w| w[0] - w[1] > 1e-3) {
            return l;
        }
    }
}

/// Erdős–Rényi graph plus a ring, so every node has degree at least two.
pub fn random_connected_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        edges.push((i, (i + 1) % n, rng.random_range(0.5..2.0)));
        for j in i + 2..n {
            if rng.random::<f64>() < p {
                edges.push((i, j, rng.random_range(0.5..2.0)));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

pub fn unit_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

pub fn dense_power(s: &Matrix, t: u32) -> Matrix {
    let mut p = Matrix::identity(s.rows());
    for _ in 0..t {
        p = p.matmul(s);
    }
    p
}

pub fn sparse(s: &Matrix) -> SparseMatrix {
    SparseMatrix::from_dense(s)
}

/// Dense random-walk matrix `D⁻¹A` and the degree vector.
pub fn random_walk(g: &Graph) -> (Matrix, Vec<f64>) {
    let a = g.adjacency(false).to_dense();
    let n = a.rows();
    let d: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
    (Matrix::from_fn(n, n, |i, j| a[(i, j)] / d[i]), d)
}
