use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("signal too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("zero-energy input to correlation")]
    ZeroEnergy,

    #[error("constant block (zero standard deviation)")]
    ConstantBlock,

    #[error("only {0} usable points on the R/S curve, need at least 4")]
    SparseCurve(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("record {record_id}: {source}")]
    Record {
        record_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the id of the record it concerns.
    pub fn for_record(self, record_id: &str) -> Self {
        Error::Record {
            record_id: record_id.to_string(),
            source: Box::new(self),
        }
    }
}
