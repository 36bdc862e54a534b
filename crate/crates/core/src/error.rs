use thiserror::Error;

/// Errors produced by validation, the solvers, and file I/O.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },

    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error("entries sum to {sum}, which is not within 1e-6 of 1")]
    NotNormalized { sum: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("outside the regularizer domain: {0}")]
    Domain(String),

    #[error("support violation: Q[{row},{col}] = 0 while P[{row},{col}] = {p_value} > 0")]
    Support { row: usize, col: usize, p_value: f64 },

    #[error(
        "underflow in {axis} {index}: the scaling denominator vanished; \
         retry with log-domain updates or a larger lambda"
    )]
    Underflow { axis: &'static str, index: usize },

    #[error("root bracketing failed: {0}")]
    Bracket(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("problem too large for the exact solver: {cells} cells exceed the limit of {limit}")]
    TooLarge { cells: usize, limit: usize },

    #[error("pivot limit exceeded after {0} pivots")]
    PivotLimit(usize),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed image: {0}")]
    Image(String),
}

pub type Result<T> = std::result::Result<T, Error>;
