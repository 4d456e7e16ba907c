use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sequence must contain at least one element")]
    EmptySequence,

    #[error("non-finite input value")]
    NonFiniteInput,

    #[error("cosine is undefined for a zero vector")]
    ZeroVector,

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    /// `exp` of the given exponent would leave the finite, positive range of f64.
    #[error("exponent {exponent} at timestep {index} exceeds the overflow guard of {limit}")]
    Overflow { index: usize, exponent: f64, limit: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("did not converge after {iterations} iterations (max |gradient| = {gradient:e})")]
    DidNotConverge { iterations: usize, gradient: f64 },
}
