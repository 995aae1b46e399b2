use std::io;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("index {index} out of range for size {size}")]
    Index { index: usize, size: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("usage error: {0}")]
    Usage(String),

    /// Carries the last iterate with a finite objective so callers can recover.
    #[error("optimization failed after {iterations} iterations: {message}")]
    Optimization {
        message: String,
        last_valid: Vec<f64>,
        iterations: usize,
    },

    /// Training diverged; `epoch` is the epoch in which the non-finite loss appeared.
    #[error("training diverged in epoch {epoch}: {message}")]
    Training { message: String, epoch: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
