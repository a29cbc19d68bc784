use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported channel bandwidth {0} Hz (supply the sample rate directly)")]
    UnsupportedChannel(u64),

    #[error("extended cyclic prefix is not supported")]
    ExtendedCp,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("symbol sequence does not tile half subframe {half_subframe}: {detail}")]
    Tiling { half_subframe: usize, detail: String },

    #[error("guard band violation: {0}")]
    GuardBand(String),

    #[error("transition bands overlap: {required} bins required, {available} available")]
    TransitionOverlap { required: usize, available: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("measurement failed: {0}")]
    Metric(String),

    #[error("scenario schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::OutOfRange(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::Metric(_) | Error::Dimension(_) => 2,
            _ => 1,
        }
    }
}
