use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("particle label {label} out of range 1..={total}")]
    LabelOutOfRange { label: usize, total: usize },

    #[error("particle label {0} used more than once")]
    LabelCollision(usize),

    #[error("{what} is not hermitian (max-abs defect {defect:.3e})")]
    NotHermitian { what: String, defect: f64 },

    #[error("{what} is not symmetric under particle exchange (max-abs defect {defect:.3e})")]
    NotSwapSymmetric { what: String, defect: f64 },

    #[error("enumeration of size {size} exceeds the cap of {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last increment {last_increment:.3e})")]
    NoConvergence { iterations: usize, last_increment: f64 },

    #[error("marginal of order {0} is missing")]
    MissingMarginal(usize),

    #[error("expectation value has imaginary part {0:.3e}")]
    NonRealExpectation(f64),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
