//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every operation of a forward pass as a node holding its value
//! and the handles of its inputs. [`Tape::backward`] then walks the nodes in reverse
//! creation order and accumulates vector-Jacobian products. Nodes that do not depend
//! on any parameter are skipped, so constant bases (a precomputed Lanczos basis, the
//! graph operator) cost nothing in the reverse pass.
//!
//! Sparse operators with learnable values use a fixed sparsity pattern held in an
//! [`Rc<SparseMatrix>`]; only the value vector (`nnz × 1`) lives on the tape.

use std::rc::Rc;

use crate::matrix::Matrix;
use crate::sparse::SparseMatrix;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulScalar(Var, Var),
    DivScalar(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    InvSqrt(Var),
    Transpose(Var),
    HCat(Vec<Var>),
    Reshape(Var),
    Sum(Var),
    Norm(Var),
    ScaleRows(Var, Var),
    MeanRows(Var),
    SparseMul {
        pattern: Rc<SparseMatrix>,
        values: Var,
        x: Var,
    },
    EdgeSqDist {
        pattern: Rc<SparseMatrix>,
        h: Var,
    },
    RowSum {
        pattern: Rc<SparseMatrix>,
        values: Var,
    },
    SymNormalize {
        pattern: Rc<SparseMatrix>,
        values: Var,
        dinv: Var,
    },
    Tridiag {
        diag: Vec<Var>,
        off: Vec<Var>,
    },
    CrossEntropy {
        logits: Var,
        labels: Rc<Vec<usize>>,
        mask: Rc<Vec<usize>>,
    },
    Mse {
        pred: Var,
        target: Rc<Matrix>,
    },
}

struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

pub struct Tape {
    nodes: Vec<Node>,
    check_finite: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self {
            nodes: Vec::new(),
            check_finite: true,
        }
    }
}

/// Gradients from one reverse pass, indexed by [`Var`].
pub struct Grads {
    grads: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Grads {
    /// Gradient of `v`; zeros when nothing flowed into it.
    pub fn get(&self, v: Var) -> Matrix {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Matrix::zeros(r, c)
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A tape that lets non-finite values through instead of asserting in debug
    /// builds, for callers that detect divergence themselves.
    pub fn unchecked() -> Self {
        Self {
            nodes: Vec::new(),
            check_finite: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> Var {
        debug_assert!(
            !self.check_finite || value.is_finite(),
            "non-finite value produced by {op:?}"
        );
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A leaf that receives gradients.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf treated as a constant.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::MatMul(a, b), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).add(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::Add(a, b), ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).sub(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::Sub(a, b), ng)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::Mul(a, b), ng)
    }

    /// `a + 1·bias` with `bias` a `1 × C` row broadcast over the rows of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(bias));
        assert_eq!(bv.shape(), (1, av.cols()), "add_row: bias shape");
        let mut v = av.clone();
        for i in 0..v.rows() {
            for (x, b) in v.row_mut(i).iter_mut().zip(bv.as_slice()) {
                *x += b;
            }
        }
        let ng = self.ng(a) || self.ng(bias);
        self.push(v, Op::AddRow(a, bias), ng)
    }

    /// `a · s` for a `1 × 1` node `s`.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Var {
        let v = self.value(a).scale(self.value(s).item());
        let ng = self.ng(a) || self.ng(s);
        self.push(v, Op::MulScalar(a, s), ng)
    }

    /// `a / s` for a `1 × 1` node `s`.
    pub fn div_scalar(&mut self, a: Var, s: Var) -> Var {
        let sv = self.value(s).item();
        let v = self.value(a).map(|x| x / sv);
        let ng = self.ng(a) || self.ng(s);
        self.push(v, Op::DivScalar(a, s), ng)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).scale(c);
        let ng = self.ng(a);
        self.push(v, Op::Scale(a, c), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        let ng = self.ng(a);
        self.push(v, Op::Relu(a), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        let ng = self.ng(a);
        self.push(v, Op::Tanh(a), ng)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::exp);
        let ng = self.ng(a);
        self.push(v, Op::Exp(a), ng)
    }

    /// `x^{-1/2}` for `x > 0` and `0` otherwise.
    pub fn inv_sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| if x > 0.0 { 1.0 / x.sqrt() } else { 0.0 });
        let ng = self.ng(a);
        self.push(v, Op::InvSqrt(a), ng)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        let ng = self.ng(a);
        self.push(v, Op::Transpose(a), ng)
    }

    /// Column-wise concatenation.
    pub fn hcat(&mut self, parts: &[Var]) -> Var {
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Matrix::hcat(&mats);
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(v, Op::HCat(parts.to_vec()), ng)
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let v = self.value(a).reshape(rows, cols);
        let ng = self.ng(a);
        self.push(v, Op::Reshape(a), ng)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Matrix::scalar(self.value(a).sum());
        let ng = self.ng(a);
        self.push(v, Op::Sum(a), ng)
    }

    /// Frobenius norm as a `1 × 1` node.
    pub fn norm(&mut self, a: Var) -> Var {
        let v = Matrix::scalar(self.value(a).frobenius_norm());
        let ng = self.ng(a);
        self.push(v, Op::Norm(a), ng)
    }

    /// `aᵀb` for two column vectors of equal length, as a `1 × 1` node.
    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let at = self.transpose(a);
        self.matmul(at, b)
    }

    /// Scales row `i` of `a` by `c[i]` (`c` is `R × 1`).
    pub fn scale_rows(&mut self, a: Var, c: Var) -> Var {
        let (av, cv) = (self.value(a), self.value(c));
        assert_eq!(cv.shape(), (av.rows(), 1), "scale_rows: factor shape");
        let mut v = av.clone();
        for i in 0..v.rows() {
            let f = cv[(i, 0)];
            for x in v.row_mut(i) {
                *x *= f;
            }
        }
        let ng = self.ng(a) || self.ng(c);
        self.push(v, Op::ScaleRows(a, c), ng)
    }

    /// Mean over rows, `R × C → 1 × C`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let r = av.rows() as f64;
        let v = Matrix::from_fn(1, av.cols(), |_, j| (0..av.rows()).map(|i| av[(i, j)]).sum::<f64>() / r);
        let ng = self.ng(a);
        self.push(v, Op::MeanRows(a), ng)
    }

    /// `S(values) · x` where `values` (`nnz × 1`) fills the pattern's stored entries.
    pub fn sparse_mul(&mut self, pattern: &Rc<SparseMatrix>, values: Var, x: Var) -> Var {
        let s = pattern.with_values(self.value(values).as_slice().to_vec());
        let v = s.spmm(self.value(x)).expect("sparse_mul: shape");
        let ng = self.ng(values) || self.ng(x);
        self.push(
            v,
            Op::SparseMul {
                pattern: Rc::clone(pattern),
                values,
                x,
            },
            ng,
        )
    }

    /// `‖h_i − h_j‖²` for every stored entry `(i, j)` of the pattern, as `nnz × 1`.
    pub fn edge_sq_dist(&mut self, pattern: &Rc<SparseMatrix>, h: Var) -> Var {
        let hv = self.value(h);
        let d: Vec<f64> = pattern
            .entries()
            .map(|(i, j, _)| hv.row(i).iter().zip(hv.row(j)).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        let ng = self.ng(h);
        self.push(
            Matrix::column_vector(&d),
            Op::EdgeSqDist {
                pattern: Rc::clone(pattern),
                h,
            },
            ng,
        )
    }

    /// Row sums of `S(values)`, as `N × 1`.
    pub fn row_sum(&mut self, pattern: &Rc<SparseMatrix>, values: Var) -> Var {
        let vals = self.value(values).as_slice();
        let mut out = vec![0.0; pattern.dim()];
        for ((i, _, _), v) in pattern.entries().zip(vals) {
            out[i] += v;
        }
        let ng = self.ng(values);
        self.push(
            Matrix::column_vector(&out),
            Op::RowSum {
                pattern: Rc::clone(pattern),
                values,
            },
            ng,
        )
    }

    /// `dinv_i · v_k · dinv_j` for every stored entry `k = (i, j)`.
    pub fn sym_normalize(&mut self, pattern: &Rc<SparseMatrix>, values: Var, dinv: Var) -> Var {
        let (vals, dv) = (self.value(values).as_slice(), self.value(dinv).as_slice());
        let out: Vec<f64> = pattern
            .entries()
            .zip(vals)
            .map(|((i, j, _), v)| dv[i] * v * dv[j])
            .collect();
        let ng = self.ng(values) || self.ng(dinv);
        self.push(
            Matrix::column_vector(&out),
            Op::SymNormalize {
                pattern: Rc::clone(pattern),
                values,
                dinv,
            },
            ng,
        )
    }

    /// Symmetric tridiagonal `size × size` matrix from `1 × 1` nodes; entries past
    /// the supplied diagonals are zero.
    pub fn tridiag(&mut self, diag: &[Var], off: &[Var], size: usize) -> Var {
        assert!(diag.len() <= size && off.len() < size.max(1));
        let mut t = Matrix::zeros(size, size);
        for (i, &g) in diag.iter().enumerate() {
            t[(i, i)] = self.value(g).item();
        }
        for (i, &b) in off.iter().enumerate() {
            let x = self.value(b).item();
            t[(i, i + 1)] = x;
            t[(i + 1, i)] = x;
        }
        let ng = diag.iter().chain(off).any(|&v| self.ng(v));
        self.push(
            t,
            Op::Tridiag {
                diag: diag.to_vec(),
                off: off.to_vec(),
            },
            ng,
        )
    }

    /// Mean softmax cross-entropy over the rows listed in `mask`.
    pub fn cross_entropy(&mut self, logits: Var, labels: Rc<Vec<usize>>, mask: Rc<Vec<usize>>) -> Var {
        let lv = self.value(logits);
        let loss = mask
            .iter()
            .map(|&i| {
                let row = lv.row(i);
                let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
                lse - row[labels[i]]
            })
            .sum::<f64>()
            / mask.len() as f64;
        let ng = self.ng(logits);
        self.push(Matrix::scalar(loss), Op::CrossEntropy { logits, labels, mask }, ng)
    }

    /// Mean squared error over all entries.
    pub fn mse(&mut self, pred: Var, target: Rc<Matrix>) -> Var {
        let pv = self.value(pred);
        let loss = pv
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / pv.len() as f64;
        let ng = self.ng(pred);
        self.push(Matrix::scalar(loss), Op::Mse { pred, target }, ng)
    }

    /// Reverse pass from `output`, seeded with `seed` (same shape as the output).
    pub fn backward(&self, output: Var, seed: &Matrix) -> Grads {
        assert_eq!(self.value(output).shape(), seed.shape(), "backward: seed shape");
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(seed.clone());
        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Grads {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        }
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let mut acc = |v: Var, d: Matrix| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&d),
                slot => *slot = Some(d),
            }
        };
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.ng(*a) {
                    acc(*a, g.matmul_t(val(*b)));
                }
                if self.ng(*b) {
                    acc(*b, val(*a).t_matmul(g));
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.scale(-1.0));
            }
            Op::Mul(a, b) => {
                acc(*a, g.zip_map(val(*b), |x, y| x * y));
                acc(*b, g.zip_map(val(*a), |x, y| x * y));
            }
            Op::AddRow(a, bias) => {
                acc(*a, g.clone());
                let db = Matrix::from_fn(1, g.cols(), |_, j| (0..g.rows()).map(|i| g[(i, j)]).sum());
                acc(*bias, db);
            }
            Op::MulScalar(a, s) => {
                let sv = val(*s).item();
                acc(*a, g.scale(sv));
                let ds = g.as_slice().iter().zip(val(*a).as_slice()).map(|(x, y)| x * y).sum();
                acc(*s, Matrix::scalar(ds));
            }
            Op::DivScalar(a, s) => {
                let sv = val(*s).item();
                acc(*a, g.scale(1.0 / sv));
                let ds: f64 = g.as_slice().iter().zip(val(*a).as_slice()).map(|(x, y)| x * y).sum();
                acc(*s, Matrix::scalar(-ds / (sv * sv)));
            }
            Op::Scale(a, c) => acc(*a, g.scale(*c)),
            Op::Relu(a) => acc(*a, g.zip_map(val(*a), |x, y| if y > 0.0 { x } else { 0.0 })),
            Op::Tanh(a) => acc(*a, g.zip_map(&node.value, |x, y| x * (1.0 - y * y))),
            Op::Exp(a) => acc(*a, g.zip_map(&node.value, |x, y| x * y)),
            Op::InvSqrt(a) => acc(*a, g.zip_map(&node.value, |x, y| -0.5 * x * y * y * y)),
            Op::Transpose(a) => acc(*a, g.transpose()),
            Op::HCat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let c = val(p).cols();
                    acc(p, g.columns(offset, offset + c));
                    offset += c;
                }
            }
            Op::Reshape(a) => {
                let (r, c) = val(*a).shape();
                acc(*a, g.reshape(r, c));
            }
            Op::Sum(a) => {
                let (r, c) = val(*a).shape();
                acc(*a, Matrix::filled(r, c, g.item()));
            }
            Op::Norm(a) => {
                let n = node.value.item();
                if n > 0.0 {
                    acc(*a, val(*a).scale(g.item() / n));
                }
            }
            Op::ScaleRows(a, c) => {
                let (av, cv) = (val(*a), val(*c));
                let mut da = g.clone();
                let mut dc = Matrix::zeros(cv.rows(), 1);
                for i in 0..g.rows() {
                    let f = cv[(i, 0)];
                    dc[(i, 0)] = g.row(i).iter().zip(av.row(i)).map(|(x, y)| x * y).sum();
                    for x in da.row_mut(i) {
                        *x *= f;
                    }
                }
                acc(*a, da);
                acc(*c, dc);
            }
            Op::MeanRows(a) => {
                let (r, c) = val(*a).shape();
                acc(*a, Matrix::from_fn(r, c, |_, j| g[(0, j)] / r as f64));
            }
            Op::SparseMul { pattern, values, x } => {
                let vals = val(*values).as_slice();
                let xv = val(*x);
                if self.ng(*x) {
                    let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                    for (((i, j, _), v), _) in pattern.entries().zip(vals).zip(0..) {
                        let gi = g.row(i).to_vec();
                        for (d, gg) in dx.row_mut(j).iter_mut().zip(&gi) {
                            *d += v * gg;
                        }
                    }
                    acc(*x, dx);
                }
                if self.ng(*values) {
                    let dv: Vec<f64> = pattern
                        .entries()
                        .map(|(i, j, _)| g.row(i).iter().zip(xv.row(j)).map(|(a, b)| a * b).sum())
                        .collect();
                    acc(*values, Matrix::column_vector(&dv));
                }
            }
            Op::EdgeSqDist { pattern, h } => {
                let hv = val(*h);
                let mut dh = Matrix::zeros(hv.rows(), hv.cols());
                for ((i, j, _), k) in pattern.entries().zip(0..) {
                    let gk = 2.0 * g[(k, 0)];
                    if gk == 0.0 || i == j {
                        continue;
                    }
                    for f in 0..hv.cols() {
                        let d = gk * (hv[(i, f)] - hv[(j, f)]);
                        dh[(i, f)] += d;
                        dh[(j, f)] -= d;
                    }
                }
                acc(*h, dh);
            }
            Op::RowSum { pattern, values } => {
                let dv: Vec<f64> = pattern.entries().map(|(i, _, _)| g[(i, 0)]).collect();
                acc(*values, Matrix::column_vector(&dv));
            }
            Op::SymNormalize { pattern, values, dinv } => {
                let (vals, dv) = (val(*values).as_slice(), val(*dinv).as_slice());
                let mut dvals = Vec::with_capacity(vals.len());
                let mut ddinv = vec![0.0; dv.len()];
                for (((i, j, _), v), k) in pattern.entries().zip(vals).zip(0..) {
                    let gk = g[(k, 0)];
                    dvals.push(gk * dv[i] * dv[j]);
                    ddinv[i] += gk * v * dv[j];
                    ddinv[j] += gk * v * dv[i];
                }
                acc(*values, Matrix::column_vector(&dvals));
                acc(*dinv, Matrix::column_vector(&ddinv));
            }
            Op::Tridiag { diag, off } => {
                for (i, &d) in diag.iter().enumerate() {
                    acc(d, Matrix::scalar(g[(i, i)]));
                }
                for (i, &b) in off.iter().enumerate() {
                    acc(b, Matrix::scalar(g[(i, i + 1)] + g[(i + 1, i)]));
                }
            }
            Op::CrossEntropy { logits, labels, mask } => {
                let lv = val(*logits);
                let scale = g.item() / mask.len() as f64;
                let mut dl = Matrix::zeros(lv.rows(), lv.cols());
                for &i in mask.iter() {
                    let row = lv.row(i);
                    let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    let z: f64 = row.iter().map(|x| (x - m).exp()).sum();
                    for (c, d) in dl.row_mut(i).iter_mut().enumerate() {
                        let p = (row[c] - m).exp() / z;
                        *d += scale * (p - if c == labels[i] { 1.0 } else { 0.0 });
                    }
                }
                acc(*logits, dl);
            }
            Op::Mse { pred, target } => {
                let pv = val(*pred);
                let c = 2.0 * g.item() / pv.len() as f64;
                acc(*pred, pv.zip_map(target, |p, t| c * (p - t)));
            }
        }
    }
}
