use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The denominator functional vanished, so the quotient is undefined.
    #[error("degenerate denominator: G(h) = {value:e}")]
    DegenerateDenominator { value: f64 },

    #[error("all {restarts} restarts hit a degenerate denominator")]
    AllRestartsDegenerate { restarts: usize },

    #[error("{path}: {message} (at {location})")]
    Format {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(path: &std::path::Path, location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
