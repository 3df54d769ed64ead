use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node id {id} out of range for graph with {num_nodes} nodes")]
    NodeOutOfRange { id: usize, num_nodes: usize },

    #[error("self-loop on node {0} is not allowed")]
    SelfLoop(usize),

    #[error("{file}:{line}: {message}")]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph has {num_nodes} nodes, dense eigendecomposition is capped at {cap}; use the Chebyshev path")]
    TooLargeForDense { num_nodes: usize, cap: usize },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("matrix is not positive definite even with jitter {max_jitter:e}")]
    NotPositiveDefinite { max_jitter: f64 },

    #[error("label informativeness is undefined: label entropy is zero")]
    UndefinedInformativeness,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite state at integration step {step}")]
    Divergence { step: usize },

    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),

    #[error("missing data: {0}")]
    Missing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
