use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected} group weights, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("{what} = {value} is outside its allowed range {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("transcript is empty")]
    EmptyTranscript,

    #[error("data error at line {line}: {message}")]
    Data { line: u64, message: String },

    #[error("{message} (iterations: {iterations}, residual: {residual:e})")]
    Numerical {
        message: String,
        iterations: usize,
        residual: f64,
    },

    #[error("{path}: {source}")]
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
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by input data rather than by configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Data { .. } | Error::Csv(_) | Error::EmptyTranscript | Error::Io { .. }
        )
    }
}
