//! Reverse-mode tape, MLPs and the two spectral graph networks.

pub mod forward;
pub mod gradcheck;
pub mod mlp;
pub mod model;
pub mod tape;

pub use forward::{
    backward_from, lanczosnet_layer, learned_operator_ada, learned_operator_lancos, model_backward, model_forward,
    predict, ForwardPass, Mode, PreparedGraph,
};
pub use gradcheck::{finite_difference_check, GradCheck, GroupError};
pub use mlp::{glorot_uniform, Activation, Dense, Mlp};
pub use model::{
    EmbeddingConfig, EmbeddingInit, Gradients, KernelConfig, LayerParams, Model, ModelConfig, Readout, ScaleConfig,
    Variant,
};
pub use tape::{Grads, Tape, Var};
