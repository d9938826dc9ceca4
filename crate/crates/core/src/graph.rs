//! Weighted undirected graphs and the operators built from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::Mlp;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// Node labels: a class per node, or one real target vector for the whole graph.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    Classes(Vec<usize>),
    Targets(Vec<f64>),
}

/// Undirected weighted graph. Each unordered pair is stored once with `i <= j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<Edge>,
    pub features: Option<Matrix>,
    pub labels: Option<Labels>,
}

impl Graph {
    /// Validates and canonicalizes an edge list; weights of repeated pairs are summed.
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut canon: Vec<Edge> = Vec::new();
        for (i, j, w) in edges {
            if i >= num_nodes || j >= num_nodes {
                return Err(Error::NodeOutOfRange { i, j, n: num_nodes });
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidWeight { i, j, w });
            }
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            canon.push(Edge { i, j, w });
        }
        canon.sort_by_key(|e| (e.i, e.j));
        let mut edges: Vec<Edge> = Vec::with_capacity(canon.len());
        for e in canon {
            match edges.last_mut() {
                Some(last) if last.i == e.i && last.j == e.j => last.w += e.w,
                _ => edges.push(e),
            }
        }
        Ok(Self {
            num_nodes,
            edges,
            features: None,
            labels: None,
        })
    }

    pub fn with_features(mut self, features: Matrix) -> Result<Self> {
        if features.rows() != self.num_nodes {
            return Err(Error::shape(
                "Graph::with_features",
                format!("{} rows", self.num_nodes),
                format!("{} rows", features.rows()),
            ));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Labels) -> Result<Self> {
        if let Labels::Classes(c) = &labels {
            if c.len() != self.num_nodes {
                return Err(Error::shape(
                    "Graph::with_labels",
                    format!("{} labels", self.num_nodes),
                    format!("{} labels", c.len()),
                ));
            }
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Symmetric expansion of the edge list, optionally with unit self-loops added.
    pub fn adjacency_triplets(&self, self_loops: bool) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(2 * self.edges.len() + self.num_nodes);
        for e in &self.edges {
            t.push((e.i, e.j, e.w));
            if e.i != e.j {
                t.push((e.j, e.i, e.w));
            }
        }
        if self_loops {
            t.extend((0..self.num_nodes).map(|i| (i, i, 1.0)));
        }
        t
    }

    pub fn adjacency(&self, self_loops: bool) -> SparseMatrix {
        SparseMatrix::from_triplets(self.num_nodes, &self.adjacency_triplets(self_loops))
            .expect("edges validated on construction")
    }

    /// Connected components by union-find; returns the number of components.
    pub fn component_count(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.num_nodes).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut count = self.num_nodes;
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
            if a != b {
                parent[a] = b;
                count -= 1;
            }
        }
        count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// `D - A`
    Combinatorial,
    /// `I - D⁻¹A`
    RandomWalk,
    /// `I - D^{-1/2} A D^{-1/2}`
    SymmetricNormalized,
    /// `S = D^{-1/2} A D^{-1/2}`
    Affinity,
}

/// Which graph operator to build. `with_self_loops` replaces `A` by `A + I` first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaplacianKind {
    pub kind: OperatorKind,
    #[serde(default)]
    pub with_self_loops: bool,
}

impl LaplacianKind {
    pub fn new(kind: OperatorKind, with_self_loops: bool) -> Self {
        Self { kind, with_self_loops }
    }

    pub fn affinity(with_self_loops: bool) -> Self {
        Self::new(OperatorKind::Affinity, with_self_loops)
    }
}

pub fn degree_matrix(g: &Graph, self_loops: bool) -> Vec<f64> {
    let mut d = vec![if self_loops { 1.0 } else { 0.0 }; g.num_nodes()];
    for e in g.edges() {
        d[e.i] += e.w;
        if e.i != e.j {
            d[e.j] += e.w;
        }
    }
    d
}

/// `D^{-1/2}` with the zero-degree entries defined as 0.
pub fn inv_sqrt_degrees(degrees: &[f64]) -> Vec<f64> {
    degrees
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect()
}

pub fn build_operator(g: &Graph, kind: LaplacianKind) -> Result<SparseMatrix> {
    let n = g.num_nodes();
    let loops = kind.with_self_loops;
    let deg = degree_matrix(g, loops);
    let adj = g.adjacency_triplets(loops);
    let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(adj.len() + n);
    match kind.kind {
        OperatorKind::Combinatorial => {
            t.extend(adj.iter().map(|&(i, j, w)| (i, j, -w)));
            t.extend(deg.iter().enumerate().map(|(i, &d)| (i, i, d)));
        }
        OperatorKind::RandomWalk => {
            if let Some(node) = deg.iter().position(|&d| d == 0.0) {
                return Err(Error::ZeroDegreeNode { node });
            }
            t.extend(adj.iter().map(|&(i, j, w)| (i, j, -w / deg[i])));
            t.extend((0..n).map(|i| (i, i, 1.0)));
        }
        OperatorKind::SymmetricNormalized | OperatorKind::Affinity => {
            let dinv = inv_sqrt_degrees(&deg);
            let sign = if kind.kind == OperatorKind::Affinity { 1.0 } else { -1.0 };
            t.extend(adj.iter().map(|&(i, j, w)| (i, j, sign * dinv[i] * w * dinv[j])));
            if kind.kind == OperatorKind::SymmetricNormalized {
                t.extend((0..n).map(|i| (i, i, 1.0)));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(n, &t)?.with_kind(kind))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonMode {
    MeanEdgeDistance,
    Fixed(f64),
}

/// Parameters of the anisotropic kernel `exp(-‖f(x_i) - f(x_j)‖² / ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub theta: Mlp,
    pub epsilon_mode: EpsilonMode,
}

impl KernelParams {
    pub fn new(theta: Mlp, epsilon_mode: EpsilonMode) -> Result<Self> {
        if let EpsilonMode::Fixed(e) = epsilon_mode {
            if !(e > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "fixed kernel epsilon must be > 0, got {e}"
                )));
            }
        }
        Ok(Self { theta, epsilon_mode })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights {
    /// Symmetric adjacency with kernel weights on the edge set.
    pub adjacency: SparseMatrix,
    pub epsilon: f64,
    /// Set when the mean edge distance was exactly zero and ε fell back to 1.
    pub epsilon_fallback: bool,
}

/// Per-edge squared distance in the embedded space, in the order of `g.edges()`.
fn edge_sq_distances(g: &Graph, h: &Matrix) -> Vec<f64> {
    g.edges()
        .iter()
        .map(|e| h.row(e.i).iter().zip(h.row(e.j)).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect()
}

pub fn graph_kernel_weights(g: &Graph, x: &Matrix, params: &KernelParams) -> Result<KernelWeights> {
    if x.rows() != g.num_nodes() {
        return Err(Error::shape(
            "graph_kernel_weights",
            format!("{} rows", g.num_nodes()),
            format!("{} rows", x.rows()),
        ));
    }
    let h = params.theta.forward(x)?;
    let dists = edge_sq_distances(g, &h);
    let (epsilon, epsilon_fallback) = match params.epsilon_mode {
        EpsilonMode::Fixed(e) => (e, false),
        EpsilonMode::MeanEdgeDistance => {
            if dists.is_empty() {
                return Err(Error::InvalidArgument(
                    "mean-edge-distance epsilon needs at least one edge".into(),
                ));
            }
            let mean = dists.iter().sum::<f64>() / dists.len() as f64;
            if mean == 0.0 {
                (1.0, true)
            } else {
                (mean, false)
            }
        }
    };
    let mut t = Vec::with_capacity(2 * dists.len());
    for (e, d) in g.edges().iter().zip(&dists) {
        let w = (-d / epsilon).exp();
        t.push((e.i, e.j, w));
        if e.i != e.j {
            t.push((e.j, e.i, w));
        }
    }
    Ok(KernelWeights {
        adjacency: SparseMatrix::from_triplets(g.num_nodes(), &t)?,
        epsilon,
        epsilon_fallback,
    })
}
