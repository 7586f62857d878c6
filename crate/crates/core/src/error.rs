use thiserror::Error;

/// Errors raised by the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument or configuration violates a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The input is well-formed but carries no usable signal (e.g. an all-zero matrix).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The symmetric eigensolver did not converge.
    #[error("eigensolver failed to converge after {iterations} iterations (matrix Frobenius norm {norm:.6e})")]
    NoConvergence { norm: f64, iterations: usize },

    /// A malformed line in a series file.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
