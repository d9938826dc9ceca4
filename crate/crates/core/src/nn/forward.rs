//! Forward and reverse passes of both network variants.
//!
//! LanczosNet consumes a precomputed decomposition as a constant. AdaLanczosNet
//! rebuilds its affinity from the learned kernel and reruns the Lanczos recurrence
//! on the tape, so gradients reach the kernel and the node embedding.

use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::mlp::Mlp;
use super::model::{Gradients, Model, ModelConfig, Readout, ScaleConfig, Variant};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{build_operator, EpsilonMode, Graph};
use crate::lanczos::{lanczos_decompose, LanczosDecomposition, LanczosOptions, StartVector};
use crate::matrix::Matrix;
use crate::sparse::SparseMatrix;

/// Everything about one graph that does not depend on parameters.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub num_nodes: usize,
    /// Observed features, `N × input_dim` (zero columns when the model has none).
    pub features: Matrix,
    /// Fixed operator used by LanczosNet short scales.
    pub operator: SparseMatrix,
    /// Precomputed basis for LanczosNet; `None` for AdaLanczosNet.
    pub decomposition: Option<LanczosDecomposition>,
    /// Entry pattern of the learned affinity (edges, plus the diagonal with self-loops).
    pub kernel_pattern: SparseMatrix,
    /// Per-entry weights whose dot product with the squared distances is the mean edge distance.
    pub edge_mean_weights: Vec<f64>,
    /// Unit start vector of the in-pass Lanczos recurrence, fixed for a run.
    pub start: Vec<f64>,
}

impl PreparedGraph {
    pub fn new(g: &Graph, config: &ModelConfig, seed: u64) -> Result<Self> {
        let n = g.num_nodes();
        if n == 0 {
            return Err(Error::InvalidArgument("graph has no nodes".into()));
        }
        let features = match (&g.features, config.input_dim) {
            (_, 0) => Matrix::zeros(n, 0),
            (Some(f), d) if f.cols() == d => f.clone(),
            (Some(f), d) => {
                return Err(Error::shape(
                    "PreparedGraph::new",
                    format!("{d} feature columns"),
                    format!("{} feature columns", f.cols()),
                ))
            }
            (None, _) => {
                return Err(Error::InvalidArgument(
                    "model expects node features but the graph has none".into(),
                ))
            }
        };
        if let Some(e) = &config.embedding {
            if e.num_nodes != n {
                return Err(Error::shape(
                    "PreparedGraph::new",
                    format!("{} nodes for the embedding", e.num_nodes),
                    format!("{n} nodes"),
                ));
            }
        }
        let operator = build_operator(g, config.operator)?;
        let start = StartVector::SeededRandomUnit(seed);
        let decomposition = match config.variant {
            Variant::LanczosNet if !config.scales.long.is_empty() => Some(lanczos_decompose(
                &operator,
                &LanczosOptions::new(config.lanczos_k)
                    .reorthogonalized(config.reorthogonalize)
                    .with_epsilon(config.lanczos_epsilon)
                    .with_start(start.clone()),
            )?),
            _ => None,
        };
        let mut triplets: Vec<(usize, usize, f64)> = g.adjacency_triplets(false);
        if config.operator.with_self_loops {
            triplets.extend((0..n).map(|i| (i, i, 1.0)));
        }
        let kernel_pattern = SparseMatrix::from_triplets(n, &triplets)?;
        let m = g.num_edges().max(1) as f64;
        let edge_mean_weights = kernel_pattern
            .entries()
            .map(|(i, j, _)| if i != j { 0.5 / m } else { 0.0 })
            .collect();
        Ok(Self {
            num_nodes: n,
            features,
            operator,
            decomposition,
            kernel_pattern,
            edge_mean_weights,
            start: start.materialize(n)?,
        })
    }

    /// Uses an externally computed decomposition (for example one loaded from disk).
    pub fn with_decomposition(mut self, d: LanczosDecomposition) -> Result<Self> {
        if d.dim() != self.num_nodes {
            return Err(Error::shape(
                "PreparedGraph::with_decomposition",
                format!("{} rows", self.num_nodes),
                format!("{} rows", d.dim()),
            ));
        }
        self.decomposition = Some(d);
        Ok(self)
    }
}

/// Training mode draws dropout masks from the supplied generator.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

/// Result of a recorded forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `N × C` logits for node readout, `1 × C` for graph readout.
    pub output: Var,
    /// Tape leaves in the order of `Model::named_params`.
    pub params: Vec<Var>,
    /// Some `β_j` fell within ten times the breakdown threshold in the in-pass recurrence.
    pub near_breakdown: bool,
    /// The in-pass recurrence stopped early.
    pub breakdown: bool,
    /// The learned kernel's mean edge distance was zero and ε fell back to 1.
    pub epsilon_fallback: bool,
}

/// Per-layer parameter handles.
struct LayerVars {
    weight: Var,
    filters: Vec<Vec<Var>>,
}

/// Layer vars, embedding, kernel vars, readout vars and the flat parameter list.
type Registered = (Vec<LayerVars>, Option<Var>, Vec<Var>, Vec<Var>, Vec<Var>);

fn register_params(model: &Model, tape: &mut Tape) -> Registered {
    let mut all = Vec::new();
    let mut layers = Vec::new();
    for layer in &model.layers {
        let weight = tape.param(layer.weight.clone());
        all.push(weight);
        let filters: Vec<Vec<Var>> = layer
            .filters
            .iter()
            .map(|f| {
                let v = f.register(tape);
                all.extend(&v);
                v
            })
            .collect();
        layers.push(LayerVars { weight, filters });
    }
    let embedding = model.embedding.as_ref().map(|e| {
        let v = tape.param(e.clone());
        all.push(v);
        v
    });
    let kernel = model.kernel.as_ref().map_or(Vec::new(), |k| {
        let v = k.register(tape);
        all.extend(&v);
        v
    });
    let readout = model.readout.as_ref().map_or(Vec::new(), |r| {
        let v = vec![tape.param(r.weight.clone()), tape.param(r.bias.clone())];
        all.extend(&v);
        v
    });
    (layers, embedding, kernel, readout, all)
}

/// Sparse operator whose values may live on the tape.
struct ShortOp {
    pattern: Rc<SparseMatrix>,
    values: Var,
}

/// Basis for the long-scale blocks.
enum LongBasis {
    /// Ritz vectors `V` with the filter input matrix of Ritz-value powers.
    Ritz { v: Var, vt: Var, powers: Var },
    /// Lanczos vectors `Q` with the vectorized tridiagonal powers (`1 × |ℐ|K²`).
    Tridiag { q: Var, qt: Var, powers: Var, k: usize },
    /// No long scales in this model.
    None,
}

fn ritz_power_matrix(d: &LanczosDecomposition, scales: &[u32]) -> Matrix {
    let r = d.effective_ritz_values();
    Matrix::from_fn(r.len(), scales.len(), |k, e| r[k].powi(scales[e] as i32))
}

/// Vectorized powers `T^{ℐ_e}`, concatenated into one `1 × |ℐ|K²` row.
fn tridiag_powers(tape: &mut Tape, t: Var, scales: &[u32]) -> Var {
    let k = tape.value(t).rows();
    let mut parts = Vec::with_capacity(scales.len());
    let mut cur = tape.constant(Matrix::identity(k));
    let mut p = 0;
    for &s in scales {
        while p < s {
            cur = tape.matmul(cur, t);
            p += 1;
        }
        parts.push(tape.reshape(cur, 1, k * k));
    }
    tape.hcat(&parts)
}

/// One convolution: `[S^{𝒮_1}Y, …, L̂_1 Y, …] · W`.
fn conv_layer(
    tape: &mut Tape,
    y: Var,
    short: &ShortOp,
    long: &LongBasis,
    short_scales: &[u32],
    filters: &[(&Mlp, &[Var])],
    weight: Var,
) -> Result<Var> {
    let mut blocks = Vec::with_capacity(short_scales.len() + filters.len());
    let mut cur = y;
    let mut p = 0;
    for &s in short_scales {
        while p < s {
            cur = tape.sparse_mul(&short.pattern, short.values, cur);
            p += 1;
        }
        blocks.push(cur);
    }
    for &(mlp, params) in filters {
        let block = match *long {
            LongBasis::Ritz { v, vt, powers } => {
                let f = mlp.forward_on(tape, powers, params)?;
                let z = tape.matmul(vt, y);
                let z = tape.scale_rows(z, f);
                tape.matmul(v, z)
            }
            LongBasis::Tridiag { q, qt, powers, k } => {
                let f = mlp.forward_on(tape, powers, params)?;
                let f = tape.reshape(f, k, k);
                let ft = tape.transpose(f);
                let g = tape.add(f, ft);
                let z = tape.matmul(qt, y);
                let z = tape.matmul(g, z);
                tape.matmul(q, z)
            }
            LongBasis::None => return Err(Error::MissingDecomposition),
        };
        blocks.push(block);
    }
    let cat = if blocks.len() == 1 {
        blocks[0]
    } else {
        tape.hcat(&blocks)
    };
    let (din, dout) = (tape.value(cat).cols(), tape.value(weight).rows());
    if din != dout {
        return Err(Error::shape(
            "conv_layer",
            format!("{dout} concatenated columns"),
            format!("{din} concatenated columns"),
        ));
    }
    Ok(tape.matmul(cat, weight))
}

fn dropout(tape: &mut Tape, x: Var, rate: f64, rng: &mut ChaCha8Rng) -> Var {
    let (r, c) = tape.value(x).shape();
    let keep = 1.0 - rate;
    let mask = Matrix::from_fn(r, c, |_, _| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
    let m = tape.constant(mask);
    tape.mul(x, m)
}

struct AdaBasis {
    short: ShortOp,
    q: Var,
    t: Var,
    near_breakdown: bool,
    breakdown: bool,
    epsilon_fallback: bool,
}

/// Learned affinity and the Lanczos recurrence recorded on the tape.
fn ada_basis(
    tape: &mut Tape,
    model: &Model,
    pg: &PreparedGraph,
    input: Var,
    kernel_params: &[Var],
) -> Result<AdaBasis> {
    let cfg = &model.config;
    let h = match &model.kernel {
        Some(k) => k.forward_on(tape, input, kernel_params)?,
        None => input,
    };
    let pattern = Rc::new(pg.kernel_pattern.clone());
    let d = tape.edge_sq_dist(&pattern, h);
    let epsilon_mode = cfg.kernel.as_ref().map_or(EpsilonMode::MeanEdgeDistance, |k| k.epsilon);
    let (eps, epsilon_fallback) = match epsilon_mode {
        EpsilonMode::Fixed(e) => (tape.constant(Matrix::scalar(e)), false),
        EpsilonMode::MeanEdgeDistance => {
            let c = tape.constant(Matrix::from_vec(
                1,
                pg.edge_mean_weights.len(),
                pg.edge_mean_weights.clone(),
            ));
            let mean = tape.matmul(c, d);
            if tape.value(mean).item() > 0.0 {
                (mean, false)
            } else {
                (tape.constant(Matrix::scalar(1.0)), true)
            }
        }
    };
    let scaled = tape.div_scalar(d, eps);
    let scaled = tape.scale(scaled, -1.0);
    let w = tape.exp(scaled);
    let deg = tape.row_sum(&pattern, w);
    let dinv = tape.inv_sqrt(deg);
    let s = tape.sym_normalize(&pattern, w, dinv);
    let short = ShortOp {
        pattern: Rc::clone(&pattern),
        values: s,
    };

    let n = pg.num_nodes;
    let k = cfg.lanczos_k;
    let steps = k.min(n);
    let eps_b = cfg.lanczos_epsilon;
    let mut qs = vec![tape.constant(Matrix::column_vector(&pg.start))];
    let mut gammas = Vec::with_capacity(steps);
    let mut betas: Vec<Var> = Vec::with_capacity(steps);
    let (mut near_breakdown, mut breakdown) = (false, false);
    for j in 0..steps {
        let qj = qs[j];
        let mut z = tape.sparse_mul(&pattern, s, qj);
        let g = tape.dot(qj, z);
        gammas.push(g);
        let gq = tape.mul_scalar(qj, g);
        z = tape.sub(z, gq);
        if j > 0 {
            let bq = tape.mul_scalar(qs[j - 1], betas[j - 1]);
            z = tape.sub(z, bq);
        }
        if cfg.reorthogonalize {
            for &qi in &qs[..j] {
                let c = tape.dot(z, qi);
                let cq = tape.mul_scalar(qi, c);
                z = tape.sub(z, cq);
            }
        }
        let b = tape.norm(z);
        let bv = tape.value(b).item();
        if bv < eps_b {
            breakdown = true;
            break;
        }
        if bv < 10.0 * eps_b {
            near_breakdown = true;
        }
        if j + 1 == steps {
            break;
        }
        betas.push(b);
        qs.push(tape.div_scalar(z, b));
    }
    let done = gammas.len();
    betas.truncate(done.saturating_sub(1));
    qs.truncate(done);
    if done < k {
        qs.push(tape.constant(Matrix::zeros(n, k - done)));
    }
    let q = tape.hcat(&qs);
    let t = tape.tridiag(&gammas, &betas, k);
    Ok(AdaBasis {
        short,
        q,
        t,
        near_breakdown,
        breakdown,
        epsilon_fallback,
    })
}

/// Records a forward pass of `model` on `pg`.
pub fn model_forward(model: &Model, pg: &PreparedGraph, tape: &mut Tape, mut mode: Mode<'_>) -> Result<ForwardPass> {
    let cfg = &model.config;
    if pg.features.cols() != cfg.input_dim {
        return Err(Error::shape(
            "model_forward",
            format!("{} feature columns", cfg.input_dim),
            format!("{} feature columns", pg.features.cols()),
        ));
    }
    let (layer_vars, embedding, kernel_vars, readout_vars, params) = register_params(model, tape);

    let mut parts = Vec::new();
    if cfg.input_dim > 0 {
        parts.push(tape.constant(pg.features.clone()));
    }
    if let Some(e) = embedding {
        parts.push(e);
    }
    let input = if parts.len() == 1 { parts[0] } else { tape.hcat(&parts) };

    let long_scales = &cfg.scales.long;
    let (short, long, near_breakdown, breakdown, epsilon_fallback) = match cfg.variant {
        Variant::LanczosNet => {
            let pattern = Rc::new(pg.operator.clone());
            let values = tape.constant(Matrix::column_vector(pg.operator.values()));
            let long = match (&pg.decomposition, long_scales.is_empty()) {
                (_, true) => LongBasis::None,
                (Some(d), false) => {
                    if d.dim() != pg.num_nodes {
                        return Err(Error::shape(
                            "model_forward",
                            format!("{} basis rows", pg.num_nodes),
                            format!("{} basis rows", d.dim()),
                        ));
                    }
                    LongBasis::Ritz {
                        v: tape.constant(d.ritz_vectors.clone()),
                        vt: tape.constant(d.ritz_vectors.transpose()),
                        powers: tape.constant(ritz_power_matrix(d, long_scales)),
                    }
                }
                (None, false) => return Err(Error::MissingDecomposition),
            };
            (ShortOp { pattern, values }, long, false, false, false)
        }
        Variant::AdaLanczosNet => {
            let b = ada_basis(tape, model, pg, input, &kernel_vars)?;
            let long = if long_scales.is_empty() {
                LongBasis::None
            } else {
                let qt = tape.transpose(b.q);
                let powers = tridiag_powers(tape, b.t, long_scales);
                LongBasis::Tridiag {
                    q: b.q,
                    qt,
                    powers,
                    k: cfg.lanczos_k,
                }
            };
            (b.short, long, b.near_breakdown, b.breakdown, b.epsilon_fallback)
        }
    };

    let mut y = input;
    let num_layers = model.layers.len();
    let graph_readout = cfg.readout == Readout::GraphMean;
    for (l, (layer, vars)) in model.layers.iter().zip(&layer_vars).enumerate() {
        let filters: Vec<(&Mlp, &[Var])> = layer
            .filters
            .iter()
            .zip(&vars.filters)
            .map(|(m, v)| (m, v.as_slice()))
            .collect();
        y = conv_layer(tape, y, &short, &long, &cfg.scales.short, &filters, vars.weight)?;
        if l + 1 < num_layers || graph_readout {
            y = cfg.activation.apply(tape, y);
            if let Mode::Train(rng) = &mut mode {
                if cfg.dropout > 0.0 {
                    y = dropout(tape, y, cfg.dropout, rng);
                }
            }
        }
    }
    if graph_readout {
        let pooled = tape.mean_rows(y);
        let z = tape.matmul(pooled, readout_vars[0]);
        y = tape.add_row(z, readout_vars[1]);
    }
    Ok(ForwardPass {
        output: y,
        params,
        near_breakdown,
        breakdown,
        epsilon_fallback,
    })
}

/// Parameter gradients of `target` seeded with `seed`.
pub fn backward_from(model: &Model, tape: &Tape, pass: &ForwardPass, target: Var, seed: &Matrix) -> Gradients {
    let grads = tape.backward(target, seed);
    Gradients {
        names: model.named_params().into_iter().map(|(n, _)| n).collect(),
        values: pass.params.iter().map(|&p| grads.get(p)).collect(),
    }
}

/// Parameter gradients given the upstream gradient of the model output.
pub fn model_backward(model: &Model, tape: &Tape, pass: &ForwardPass, loss_grad: &Matrix) -> Result<Gradients> {
    let shape = tape.value(pass.output).shape();
    if loss_grad.shape() != shape {
        return Err(Error::shape(
            "model_backward",
            format!("{shape:?}"),
            format!("{:?}", loss_grad.shape()),
        ));
    }
    Ok(backward_from(model, tape, pass, pass.output, loss_grad))
}

/// Eval-mode output as a plain matrix.
pub fn predict(model: &Model, pg: &PreparedGraph) -> Result<Matrix> {
    let mut tape = Tape::new();
    let pass = model_forward(model, pg, &mut tape, Mode::Eval)?;
    Ok(tape.value(pass.output).clone())
}

/// One LanczosNet convolution evaluated outside a model: `[S^{𝒮}Y, L̂(ℐ)Y] · W`.
pub fn lanczosnet_layer(
    y: &Matrix,
    s: &SparseMatrix,
    d: Option<&LanczosDecomposition>,
    w: &Matrix,
    filters: &[Mlp],
    scales: &ScaleConfig,
) -> Result<Matrix> {
    scales.validate()?;
    if y.rows() != s.dim() {
        return Err(Error::shape(
            "lanczosnet_layer",
            format!("{} rows", s.dim()),
            format!("{} rows", y.rows()),
        ));
    }
    if filters.len() != scales.long.len() {
        return Err(Error::shape(
            "lanczosnet_layer",
            format!("{} filters", scales.long.len()),
            format!("{} filters", filters.len()),
        ));
    }
    let mut tape = Tape::new();
    let yv = tape.constant(y.clone());
    let short = ShortOp {
        pattern: Rc::new(s.clone()),
        values: tape.constant(Matrix::column_vector(s.values())),
    };
    let long = match d {
        _ if scales.long.is_empty() => LongBasis::None,
        Some(d) => LongBasis::Ritz {
            v: tape.constant(d.ritz_vectors.clone()),
            vt: tape.constant(d.ritz_vectors.transpose()),
            powers: tape.constant(ritz_power_matrix(d, &scales.long)),
        },
        None => return Err(Error::MissingDecomposition),
    };
    let params: Vec<Vec<Var>> = filters
        .iter()
        .map(|f| {
            check_filter_input(f, scales.long.len(), "lanczosnet_layer")?;
            Ok(f.layers()
                .iter()
                .flat_map(|l| [l.weight.clone(), l.bias.clone()])
                .map(|m| tape.constant(m))
                .collect())
        })
        .collect::<Result<_>>()?;
    let fs: Vec<(&Mlp, &[Var])> = filters.iter().zip(&params).map(|(f, p)| (f, p.as_slice())).collect();
    let wv = tape.constant(w.clone());
    let out = conv_layer(&mut tape, yv, &short, &long, &scales.short, &fs, wv)?;
    Ok(tape.value(out).clone())
}

fn check_filter_input(filter: &Mlp, expected: usize, op: &'static str) -> Result<()> {
    if filter.input_dim() != expected {
        return Err(Error::shape(
            op,
            format!("filter input width {expected}"),
            format!("filter input width {}", filter.input_dim()),
        ));
    }
    Ok(())
}

/// Dense `Σ_k f(r_k^{ℐ_1}, …, r_k^{ℐ_E}) v_k v_kᵀ`.
pub fn learned_operator_lancos(d: &LanczosDecomposition, filter: &Mlp, scales: &[u32]) -> Result<Matrix> {
    check_filter_input(filter, scales.len(), "learned_operator_lancos")?;
    let f = filter.forward(&ritz_power_matrix(d, scales))?;
    if f.cols() != 1 {
        return Err(Error::shape(
            "learned_operator_lancos",
            "filter output width 1",
            format!("filter output width {}", f.cols()),
        ));
    }
    let v = &d.ritz_vectors;
    let mut scaled = v.clone();
    for i in 0..scaled.rows() {
        for (k, x) in scaled.row_mut(i).iter_mut().enumerate() {
            *x *= f[(k, 0)];
        }
    }
    Ok(symmetric_product(&scaled, v))
}

/// Dense `Q g Qᵀ` with `g = f + fᵀ` and `f` the filter applied to vectorized powers of `T`.
pub fn learned_operator_ada(q: &Matrix, t: &Matrix, filter: &Mlp, scales: &[u32]) -> Result<Matrix> {
    let k = t.rows();
    if t.cols() != k || q.cols() != k {
        return Err(Error::shape(
            "learned_operator_ada",
            format!("Q with {} columns and square T", t.rows()),
            format!("Q {:?}, T {:?}", q.shape(), t.shape()),
        ));
    }
    check_filter_input(filter, scales.len() * k * k, "learned_operator_ada")?;
    let mut tape = Tape::new();
    let tv = tape.constant(t.clone());
    let powers = tridiag_powers(&mut tape, tv, scales);
    let pv = tape.value(powers).clone();
    let f = filter.forward(&pv)?;
    if f.len() != k * k {
        return Err(Error::shape(
            "learned_operator_ada",
            format!("filter output width {}", k * k),
            format!("filter output width {}", f.cols()),
        ));
    }
    let f = f.reshape(k, k);
    let g = f.add(&f.transpose());
    Ok(symmetric_product(&q.matmul(&g), q))
}

/// `A Bᵀ` for a product known to be symmetric; the lower triangle mirrors the upper.
fn symmetric_product(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = a.matmul_t(b);
    let n = out.rows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = avg;
            out[(j, i)] = avg;
        }
    }
    out
}
