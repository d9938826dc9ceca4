//! Lanczos-based spectral graph convolutions.
//!
//! The crate covers graph operators, the Lanczos tridiagonalization with its
//! low-rank approximation, exact spectral tools for reference, and the
//! LanczosNet / AdaLanczosNet models with a small training loop.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod graph;
pub mod io;
pub mod lanczos;
pub mod matrix;
pub mod nn;
pub mod sparse;
pub mod spectral;
pub mod train;

pub use error::{Error, Result};
pub use graph::{build_operator, Edge, Graph, Labels, LaplacianKind, OperatorKind};
pub use lanczos::{lanczos_decompose, LanczosDecomposition, LanczosOptions, StartVector};
pub use matrix::Matrix;
pub use sparse::SparseMatrix;
