use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AneError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AneError {
    #[error("invalid range: lower bound {lo} must be below upper bound {hi}")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("problem has no exact solution")]
    MissingExactSolution,

    #[error("non-finite loss {value} at iteration {iteration}")]
    NonFiniteLoss { iteration: usize, value: f64 },

    #[error("degenerate cell: {0}")]
    DegenerateCell(String),

    #[error("duplicate breakpoints at {0}")]
    DuplicateBreakpoint(f64),

    #[error("near-duplicate hyperplanes (neurons {0} and {1})")]
    NearDuplicateHyperplanes(usize, usize),

    #[error("linear system is not positive definite")]
    NotPositiveDefinite,

    #[error("partition has no cells")]
    EmptyPartition,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AneError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AneError::Io {
            path: path.into(),
            source,
        }
    }
}
