use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("numerical failure in simplex: {0}")]
    Numerical(String),

    #[error("market clearing ended with status {0:?}")]
    MarketClearing(crate::lp::Status),

    #[error("invalid case at `{field}`: {reason}")]
    InvalidCase { field: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid active set: {0}")]
    InvalidActiveSet(String),

    #[error("no dual statistics available to derive big-M constants")]
    EmptyStatistics,

    #[error("every load draw was infeasible for the market clearing")]
    AllDrawsInfeasible,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("training data: {0}")]
    Training(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
