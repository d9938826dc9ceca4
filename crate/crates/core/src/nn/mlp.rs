use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Identity => x,
        }
    }
}

/// Affine map `x W + b` with `W: in × out` and `b: 1 × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Matrix::zeros(input, output),
            bias: Matrix::zeros(1, output),
        }
    }

    /// Uniform in `±√(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: glorot_uniform(input, output, rng),
            bias: Matrix::zeros(1, output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }
}

pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
    Matrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-limit..=limit))
}

/// Multi-layer perceptron applied row-wise. The activation follows every hidden
/// layer; the output layer is linear unless `non_negative` adds a final rectifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    pub activation: Activation,
    pub non_negative: bool,
    width: usize,
}

impl Mlp {
    pub fn from_layers(layers: Vec<Dense>, activation: Activation, non_negative: bool) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::InvalidArgument("use Mlp::identity for a layer-free map".into()));
        };
        let width = first.input_dim();
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::shape(
                    "Mlp::from_layers",
                    pair[0].output_dim().to_string(),
                    pair[1].input_dim().to_string(),
                ));
            }
        }
        for l in &layers {
            if l.bias.shape() != (1, l.output_dim()) {
                return Err(Error::shape(
                    "Mlp::from_layers bias",
                    format!("1x{}", l.output_dim()),
                    format!("{}x{}", l.bias.rows(), l.bias.cols()),
                ));
            }
        }
        Ok(Self {
            layers,
            activation,
            non_negative,
            width,
        })
    }

    /// No layers at all: the identity on `width` columns.
    pub fn identity(width: usize) -> Self {
        Self {
            layers: Vec::new(),
            activation: Activation::Identity,
            non_negative: false,
            width,
        }
    }

    /// `widths = [input, hidden..., output]`.
    pub fn new_random(widths: &[usize], activation: Activation, non_negative: bool, rng: &mut impl Rng) -> Self {
        assert!(widths.len() >= 2, "Mlp needs at least input and output widths");
        let layers = widths.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect();
        Self::from_layers(layers, activation, non_negative).expect("widths chain")
    }

    pub fn zeros(widths: &[usize], activation: Activation) -> Self {
        assert!(widths.len() >= 2);
        let layers = widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Self::from_layers(layers, activation, false).expect("widths chain")
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.width
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.width, Dense::output_dim)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Registers weights and biases (in layer order) as tape parameters.
    pub fn register(&self, tape: &mut Tape) -> Vec<Var> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.clone(), l.bias.clone()])
            .map(|m| tape.param(m))
            .collect()
    }

    /// Forward pass on the tape with parameters previously returned by [`Mlp::register`].
    pub fn forward_on(&self, tape: &mut Tape, x: Var, params: &[Var]) -> Result<Var> {
        if tape.value(x).cols() != self.width {
            return Err(Error::shape(
                "mlp_forward",
                format!("{} input columns", self.width),
                format!("{} input columns", tape.value(x).cols()),
            ));
        }
        assert_eq!(params.len(), 2 * self.layers.len());
        let mut h = x;
        let last = self.layers.len().saturating_sub(1);
        for (k, pair) in params.chunks(2).enumerate() {
            h = tape.matmul(h, pair[0]);
            h = tape.add_row(h, pair[1]);
            if k < last {
                h = self.activation.apply(tape, h);
            }
        }
        if self.non_negative && !self.layers.is_empty() {
            h = tape.relu(h);
        }
        Ok(h)
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let params: Vec<Var> = self
            .layers
            .iter()
            .flat_map(|l| [l.weight.clone(), l.bias.clone()])
            .map(|m| tape.constant(m))
            .collect();
        let xv = tape.constant(x.clone());
        let out = self.forward_on(&mut tape, xv, &params)?;
        Ok(tape.value(out).clone())
    }
}
