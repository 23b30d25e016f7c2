use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("state {value} outside interpolation domain [{lower}, {upper}] (dimension {dim})")]
    OutOfDomain {
        dim: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("{} states outside the interpolation domain at step {step}", states.len())]
    StatesOutOfDomain { step: usize, states: Vec<(usize, f64)> },

    #[error("pricer failed on path {path} at step {step}: {source}")]
    Pricing {
        path: usize,
        step: usize,
        source: Box<Error>,
    },

    #[error("degree cap {cap} exceeded, last error estimate {last_estimate:e}")]
    DegreeCap { cap: usize, last_estimate: f64 },

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("quadrature did not converge: estimate {value}, error {error:e}")]
    Quadrature { value: f64, error: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

/// Rejects NaN and infinities with a labelled error.
pub(crate) fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(alloc::format!("{what} = {value}")))
    }
}
