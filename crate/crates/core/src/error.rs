use std::path::PathBuf;

use crate::codec::DecodeResult;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    /// The decoder hit its candidate budget; `partial` holds the best
    /// candidate seen so far.
    #[error("decoder search budget of {budget} candidates exceeded")]
    BudgetExceeded { budget: u64, partial: Box<DecodeResult> },

    #[error("network error: {0}")]
    Network(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("{}: {source}", path.display())]
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

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
