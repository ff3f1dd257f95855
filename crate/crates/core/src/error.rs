use std::path::PathBuf;

use thiserror::Error;

use crate::network::UserId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid record: {0}")]
    Invariant(String),

    #[error("unknown user {0}")]
    UnknownUser(UserId),

    #[error("time slice {slice} out of range (horizon {horizon})")]
    SliceOutOfRange { slice: usize, horizon: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("incomplete assignment: variable {0} has no value")]
    IncompleteAssignment(String),

    #[error("graph too large for exhaustive enumeration: {unclamped} unclamped variables (limit {limit})")]
    TooLarge { unclamped: usize, limit: usize },

    #[error("unknown variable {0}")]
    UnknownVariable(String),

    #[error("missing factor marginal for factor {0}")]
    MissingFactorMarginal(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("undefined: {0}")]
    Undefined(&'static str),

    #[error("image decode: {0}")]
    Image(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
