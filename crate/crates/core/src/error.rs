use thiserror::Error;

/// Errors raised by the optimization and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two vectors (or a vector and a dataset) disagree on dimension.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A gradient, loss or update produced NaN/Inf.
    #[error("non-finite value at iteration {iteration}")]
    NonFinite { iteration: u64 },

    /// An iterate left the finite range. Thread 0 is the main thread, 1 and 2
    /// are the diagnostic threads; `step` counts from the start of the run.
    #[error("thread {thread} diverged at step {step}")]
    Divergence { thread: u8, step: u64 },

    /// Rejected configuration or argument.
    #[error("{0}")]
    Invalid(String),

    /// Dataset import/export failure.
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
