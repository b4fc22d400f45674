//! Crate-wide error type.

/// Failure modes surfaced by the symbolic and numeric layers.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("division by zero rational function")]
    DivisionByZero,

    #[error("denominator vanishes at the evaluation point")]
    PoleAtPoint,

    #[error("expression error at offset {pos}: {msg}")]
    ExprParse { pos: usize, msg: String },

    #[error("scenario error at {place}: {msg}")]
    Scenario { place: String, msg: String },

    #[error("chart mismatch: expected ({expected}), found ({found})")]
    ChartMismatch { expected: String, found: String },

    #[error("value mismatch: {0}")]
    ValueMismatch(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("internal route disagreement: {0}")]
    RouteDisagreement(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
