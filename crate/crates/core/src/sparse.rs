//! Compressed-row sparse matrices for graph operators.

use crate::error::{Error, Result};
use crate::graph::LaplacianKind;
use crate::matrix::Matrix;

/// Square CSR matrix. Column indices are sorted and unique within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    kind: Option<LaplacianKind>,
}

impl SparseMatrix {
    /// Assembles an `n × n` matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        for &(i, j, _) in &sorted {
            if i >= n || j >= n {
                return Err(Error::NodeOutOfRange { i, j, n });
            }
        }
        sorted.sort_by_key(|e| (e.0, e.1));
        let mut row_offsets = vec![0usize; n + 1];
        let mut col_indices: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            last = Some((i, j));
            row_offsets[i + 1] += 1;
            col_indices.push(j);
            values.push(v);
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(Self {
            n,
            row_offsets,
            col_indices,
            values,
            kind: None,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
            kind: None,
        }
    }

    /// Drops exact zeros from a dense square matrix.
    pub fn from_dense(m: &Matrix) -> Self {
        assert_eq!(m.rows(), m.cols(), "SparseMatrix::from_dense: not square");
        let n = m.rows();
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if m[(i, j)] != 0.0 {
                    triplets.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(n, &triplets).expect("indices in range by construction")
    }

    pub(crate) fn with_kind(mut self, kind: LaplacianKind) -> Self {
        self.kind = Some(kind);
        self
    }

    /// The operator this matrix was built as, when it came from [`crate::graph::build_operator`].
    pub fn kind(&self) -> Option<LaplacianKind> {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same sparsity pattern, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.nnz());
        Self { values, ..self.clone() }
    }

    /// `(row, col, value)` for every stored entry in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.row_offsets[i]..self.row_offsets[i + 1]).map(move |k| (i, self.col_indices[k], self.values[k]))
        })
    }

    /// Row index of every stored entry.
    pub fn entry_rows(&self) -> Vec<usize> {
        let mut rows = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            rows.extend(std::iter::repeat_n(i, self.row_offsets[i + 1] - self.row_offsets[i]));
        }
        rows
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]];
        match cols.binary_search(&j) {
            Ok(k) => self.values[self.row_offsets[i] + k],
            Err(_) => 0.0,
        }
    }

    /// Position of entry `(i, j)` in the value array.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let cols = &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]];
        cols.binary_search(&j).ok().map(|k| self.row_offsets[i] + k)
    }

    /// Index of the transposed entry for every stored entry; `None` if the pattern is not symmetric.
    pub fn transpose_positions(&self) -> Option<Vec<usize>> {
        self.entries().map(|(i, j, _)| self.position(j, i)).collect()
    }

    /// Exact sparse matrix-vector product.
    pub fn spmv(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::shape("spmv", self.n.to_string(), v.len().to_string()));
        }
        Ok((0..self.n)
            .map(|i| {
                (self.row_offsets[i]..self.row_offsets[i + 1])
                    .map(|k| self.values[k] * v[self.col_indices[k]])
                    .sum()
            })
            .collect())
    }

    /// Sparse × dense product, column by column of `x` at once.
    pub fn spmm(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.n {
            return Err(Error::shape(
                "spmm",
                format!("{} rows", self.n),
                format!("{} rows", x.rows()),
            ));
        }
        let f = x.cols();
        let mut out = Matrix::zeros(self.n, f);
        for i in 0..self.n {
            let out_row = out.row_mut(i);
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let a = self.values[k];
                for (o, &b) in out_row.iter_mut().zip(x.row(self.col_indices[k])) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for (i, j, v) in self.entries() {
            m[(i, j)] = v;
        }
        m
    }

    /// Checks `|a_ij - a_ji| <= tol` over every stored entry.
    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        for (i, j, v) in self.entries() {
            let diff = (v - self.get(j, i)).abs();
            if diff > tol || diff.is_nan() {
                return Err(Error::NotSymmetric { i, j, diff });
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
