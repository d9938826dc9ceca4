use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{glorot_uniform, Activation, Dense, Mlp};
use crate::error::{Error, Result};
use crate::graph::{EpsilonMode, LaplacianKind};
use crate::lanczos::DEFAULT_EPSILON;
use crate::matrix::Matrix;

/// Short scales use explicit sparse products; long scales use Ritz-value powers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleConfig {
    pub short: Vec<u32>,
    pub long: Vec<u32>,
}

impl ScaleConfig {
    pub fn new(mut short: Vec<u32>, mut long: Vec<u32>) -> Result<Self> {
        short.sort_unstable();
        short.dedup();
        long.sort_unstable();
        long.dedup();
        let s = Self { short, long };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.short.is_empty() && self.long.is_empty() {
            return Err(Error::InvalidArgument(
                "short and long scale sets cannot both be empty".into(),
            ));
        }
        let sorted = |v: &[u32]| v.windows(2).all(|w| w[0] < w[1]);
        if !sorted(&self.short) || !sorted(&self.long) {
            return Err(Error::InvalidArgument("scale sets must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Number of feature blocks a layer concatenates: `M + E`.
    pub fn num_blocks(&self) -> usize {
        self.short.len() + self.long.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    LanczosNet,
    AdaLanczosNet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// Per-node logits from the last convolution layer.
    #[default]
    Node,
    /// Mean over nodes followed by one affine map.
    GraphMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingInit {
    /// Identity rows; requires `dim == num_nodes`.
    OneHot,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub num_nodes: usize,
    pub dim: usize,
    pub init: EmbeddingInit,
}

/// Learnable graph kernel `f_θ` for AdaLanczosNet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    #[serde(default = "default_kernel_activation")]
    pub activation: Activation,
    #[serde(default = "default_epsilon_mode")]
    pub epsilon: EpsilonMode,
}

fn default_kernel_activation() -> Activation {
    Activation::Tanh
}

fn default_epsilon_mode() -> EpsilonMode {
    EpsilonMode::MeanEdgeDistance
}

fn default_hidden() -> Vec<usize> {
    vec![64]
}

fn default_filter_hidden() -> Vec<usize> {
    vec![128]
}

fn default_k() -> usize {
    20
}

fn default_lanczos_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_dropout() -> f64 {
    0.5
}

fn default_operator() -> LaplacianKind {
    LaplacianKind::affinity(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Observed feature columns (0 when the graph has none).
    pub input_dim: usize,
    #[serde(default = "default_hidden")]
    pub hidden_dims: Vec<usize>,
    /// Classes for node classification, target width for graph regression.
    pub output_dim: usize,
    pub scales: ScaleConfig,
    #[serde(default = "default_k")]
    pub lanczos_k: usize,
    #[serde(default = "default_lanczos_epsilon")]
    pub lanczos_epsilon: f64,
    #[serde(default)]
    pub reorthogonalize: bool,
    #[serde(default = "default_operator")]
    pub operator: LaplacianKind,
    #[serde(default = "default_filter_hidden")]
    pub filter_hidden: Vec<usize>,
    #[serde(default)]
    pub filter_non_negative: bool,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub embedding: Option<EmbeddingConfig>,
    #[serde(default)]
    pub kernel: Option<KernelConfig>,
    #[serde(default)]
    pub readout: Readout,
}

impl ModelConfig {
    /// Columns of the network input: observed features plus the learned embedding.
    pub fn network_input_dim(&self) -> usize {
        self.input_dim + self.embedding.as_ref().map_or(0, |e| e.dim)
    }

    /// `(in, out)` widths of every convolution layer.
    pub fn conv_widths(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.network_input_dim()];
        dims.extend(&self.hidden_dims);
        if self.readout == Readout::Node {
            dims.push(self.output_dim);
        }
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// `[input, hidden..., output]` for one spectral filter MLP.
    pub fn filter_widths(&self) -> Vec<usize> {
        let e = self.scales.long.len();
        let k2 = self.lanczos_k * self.lanczos_k;
        let (input, output) = match self.variant {
            Variant::LanczosNet => (e, 1),
            Variant::AdaLanczosNet => (e * k2, k2),
        };
        let mut w = vec![input];
        w.extend(&self.filter_hidden);
        w.push(output);
        w
    }

    pub fn validate(&self) -> Result<()> {
        self.scales.validate()?;
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.network_input_dim() == 0 {
            return bad("model needs input features or a node embedding".into());
        }
        if self.output_dim == 0 {
            return bad("output_dim must be positive".into());
        }
        if self.hidden_dims.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        if self.readout == Readout::GraphMean && self.hidden_dims.is_empty() {
            return bad("graph readout needs at least one hidden convolution layer".into());
        }
        if self.lanczos_k == 0 {
            return bad("lanczos_k must be >= 1".into());
        }
        if !(self.lanczos_epsilon > 0.0) {
            return bad("lanczos_epsilon must be > 0".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.variant == Variant::LanczosNet && self.kernel.is_some() {
            return bad("LanczosNet has a fixed basis and cannot own a graph kernel".into());
        }
        if let Some(e) = &self.embedding {
            if e.dim == 0 || e.num_nodes == 0 {
                return bad("embedding dimensions must be positive".into());
            }
            if e.init == EmbeddingInit::OneHot && e.dim != e.num_nodes {
                return bad("one-hot embedding needs dim == num_nodes".into());
            }
        }
        if let Some(k) = &self.kernel {
            if k.output_dim == 0 {
                return bad("kernel output_dim must be positive".into());
            }
            if let EpsilonMode::Fixed(e) = k.epsilon {
                if !(e > 0.0) {
                    return bad("fixed kernel epsilon must be > 0".into());
                }
            }
        }
        Ok(())
    }
}

/// Weights of one convolution layer: `W` of shape `(M+E)·D_in × D_out` and one
/// spectral filter per long scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Matrix,
    pub filters: Vec<Mlp>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub layers: Vec<LayerParams>,
    pub embedding: Option<Matrix>,
    pub kernel: Option<Mlp>,
    pub readout: Option<Dense>,
    pub seed: u64,
}

impl Model {
    /// Random initialization; every draw comes from a ChaCha stream seeded with `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = config.scales.num_blocks();
        let filter_widths = config.filter_widths();
        let layers = config
            .conv_widths()
            .into_iter()
            .map(|(din, dout)| LayerParams {
                weight: glorot_uniform(blocks * din, dout, &mut rng),
                filters: (0..config.scales.long.len())
                    .map(|_| Mlp::new_random(&filter_widths, Activation::Relu, config.filter_non_negative, &mut rng))
                    .collect(),
            })
            .collect();
        let embedding = config.embedding.as_ref().map(|e| match e.init {
            EmbeddingInit::OneHot => Matrix::identity(e.num_nodes),
            EmbeddingInit::Random => glorot_uniform(e.num_nodes, e.dim, &mut rng),
        });
        let kernel = config.kernel.as_ref().map(|k| {
            let mut widths = vec![config.network_input_dim()];
            widths.extend(&k.hidden);
            widths.push(k.output_dim);
            Mlp::new_random(&widths, k.activation, false, &mut rng)
        });
        let readout = (config.readout == Readout::GraphMean).then(|| {
            let last = *config.hidden_dims.last().expect("validated");
            Dense::glorot(last, config.output_dim, &mut rng)
        });
        Ok(Self {
            config,
            layers,
            embedding,
            kernel,
            readout,
            seed,
        })
    }

    /// Every parameter matrix with a dotted name, in a fixed order shared by
    /// gradients, optimizer state and checkpoints.
    pub fn named_params(&self) -> Vec<(String, &Matrix)> {
        let mut out: Vec<(String, &Matrix)> = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("layer{l}.weight"), &layer.weight));
            for (f, mlp) in layer.filters.iter().enumerate() {
                for (d, dense) in mlp.layers().iter().enumerate() {
                    out.push((format!("layer{l}.filter{f}.dense{d}.weight"), &dense.weight));
                    out.push((format!("layer{l}.filter{f}.dense{d}.bias"), &dense.bias));
                }
            }
        }
        if let Some(e) = &self.embedding {
            out.push(("embedding".into(), e));
        }
        if let Some(k) = &self.kernel {
            for (d, dense) in k.layers().iter().enumerate() {
                out.push((format!("kernel.dense{d}.weight"), &dense.weight));
                out.push((format!("kernel.dense{d}.bias"), &dense.bias));
            }
        }
        if let Some(r) = &self.readout {
            out.push(("readout.weight".into(), &r.weight));
            out.push(("readout.bias".into(), &r.bias));
        }
        out
    }

    /// Mutable parameters in the order of [`Model::named_params`].
    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = Vec::new();
        for layer in &mut self.layers {
            out.push(&mut layer.weight);
            for mlp in &mut layer.filters {
                for dense in mlp.layers_mut() {
                    out.push(&mut dense.weight);
                    out.push(&mut dense.bias);
                }
            }
        }
        if let Some(e) = &mut self.embedding {
            out.push(e);
        }
        if let Some(k) = &mut self.kernel {
            for dense in k.layers_mut() {
                out.push(&mut dense.weight);
                out.push(&mut dense.bias);
            }
        }
        if let Some(r) = &mut self.readout {
            out.push(&mut r.weight);
            out.push(&mut r.bias);
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.named_params().iter().map(|(_, m)| m.len()).sum()
    }

    /// Replaces parameter values in [`Model::named_params`] order; shapes must match.
    pub fn set_params(&mut self, values: Vec<Matrix>) -> Result<()> {
        let slots = self.params_mut();
        if slots.len() != values.len() {
            return Err(Error::shape(
                "Model::set_params",
                format!("{} tensors", slots.len()),
                format!("{} tensors", values.len()),
            ));
        }
        for (slot, v) in slots.iter().zip(&values) {
            if slot.shape() != v.shape() {
                return Err(Error::shape(
                    "Model::set_params",
                    format!("{:?}", slot.shape()),
                    format!("{:?}", v.shape()),
                ));
            }
        }
        for (slot, v) in slots.into_iter().zip(values) {
            *slot = v;
        }
        Ok(())
    }
}

/// Gradients aligned with [`Model::named_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub names: Vec<String>,
    pub values: Vec<Matrix>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.names.iter().position(|n| n == name).map(|i| &self.values[i])
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|m| m.as_slice().iter().all(|&x| x == 0.0))
    }
}
