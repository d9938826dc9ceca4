use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("node {node} has zero degree; the random-walk operator needs D^-1")]
    ZeroDegreeNode { node: usize },
    #[error("edge ({i}, {j}) references a node outside 0..{n}")]
    NodeOutOfRange { i: usize, j: usize, n: usize },
    #[error("edge ({i}, {j}) has invalid weight {w}")]
    InvalidWeight { i: usize, j: usize, w: f64 },
    #[error("matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("start vector has zero norm")]
    ZeroStartVector,
    #[error("eigensolver did not converge within {sweeps} sweeps for eigenvalue {index}")]
    NoConvergence { index: usize, sweeps: usize },
    #[error("spectrum is degenerate for the error bound: {0}")]
    DegenerateSpectrum(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("a LanczosNet forward pass needs a precomputed decomposition")]
    MissingDecomposition,
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::Shape {
            op,
            expected: expected.into(),
            got: got.into(),
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
