use thiserror::Error;

/// Errors raised by the GAIT routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaitError {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("not a probability vector: {0}")]
    NotADistribution(String),

    #[error("invalid similarity matrix: {0}")]
    InvalidGram(String),

    #[error("{0} requires a strictly positive distribution (interior of the simplex)")]
    NotInterior(&'static str),

    /// `P` puts mass where `Q`'s similarity profile vanishes.
    #[error("divergence is infinite: profile of the second argument vanishes at index {index}")]
    InfiniteDivergence { index: usize },

    #[error("numerical failure at step {step}: {what}")]
    NumericalFailure { step: usize, what: String },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("input is not a Markov chain X -> Y -> Z (max factorization error {0:e})")]
    NotMarkov(f64),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GaitError {
    fn from(e: std::io::Error) -> Self {
        GaitError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GaitError>;
