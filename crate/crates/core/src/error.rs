use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("unparseable rows: {0}")]
    BadRows(String),
    #[error("duplicate timestamps: {0}")]
    DuplicateTimestamps(String),
    #[error("series too short: need at least {needed} values, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: {0} targets vs {1} intervals")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown cost kind `{0}`")]
    UnknownCostKind(String),
    #[error("no logical PI found")]
    NoLogicalPi,
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
