use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
///
/// Solver non-convergence is deliberately *not* an error: solvers return
/// their best iterate with `converged = false` and callers decide.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("formulation not applicable: {0}")]
    Inapplicable(String),

    #[error("solution did not converge; classification refused")]
    NotConverged,

    #[error("oracle budget exhausted before the value was proven exact")]
    Inexact,

    #[error("malformed graph file: {0}")]
    Parse(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
