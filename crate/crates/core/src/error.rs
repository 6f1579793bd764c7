use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed binary or text file. `at` names the byte offset or row.
    #[error("format error in {path} at {at}: {msg}")]
    Format {
        path: PathBuf,
        at: String,
        msg: String,
    },

    #[error("unsupported {format} version {found} (expected {expected})")]
    UnsupportedVersion {
        format: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("failed to ingest {path}: {msg}")]
    Ingest { path: PathBuf, msg: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("shape mismatch at layer {layer}: expected {expected:?}, got {found:?}")]
    Shape {
        layer: usize,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("{path} line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, at: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            at: at.into(),
            msg: msg.into(),
        }
    }
}
