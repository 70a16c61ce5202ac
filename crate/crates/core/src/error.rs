use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field has zero mass")]
    ZeroMass,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("grid too large for direct summation: {points} points (cap {cap})")]
    OracleTooLarge { points: usize, cap: usize },

    #[error("exponent p = {p} outside the admissible range [{lo}, {hi}]")]
    ExponentOutOfRange { p: f64, lo: f64, hi: f64 },

    #[error("operation requires a critical exponent, got regime {0}")]
    NotCritical(String),

    #[error("malformed field container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
