use thiserror::Error;

/// Errors produced by the algorithms in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Array or vector dimensions that do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Inputs that violate a documented precondition.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A quantity that is mathematically undefined for the given input
    /// (for example a moment ratio of a degenerate sample).
    #[error("undefined value: {0}")]
    Undefined(String),

    /// A simulation or training run left the finite regime.
    #[error("divergence at step {step}: {reason}")]
    Divergence { step: usize, reason: String },

    /// Malformed binary or text input.
    #[error("parse error at byte offset {offset}: {reason}")]
    Parse { offset: usize, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
