use thiserror::Error;

use crate::quadrature::QuadError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("`{name}` = {value} is outside [{lo}, {hi}]")]
    OutOfDomain {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error(transparent)]
    Quadrature(#[from] QuadError),

    #[error("series for {what} did not converge within {iterations} terms")]
    SeriesDivergence { what: &'static str, iterations: usize },

    #[error("only {got} conditioned trials, need at least {needed}")]
    InsufficientTrials { got: u64, needed: u64 },

    #[error("coverage tail beyond gamma = {gamma_max:e} bounds the remainder by {bound:e} bit/s/Hz (limit {limit:e})")]
    TailBound {
        gamma_max: f64,
        bound: f64,
        limit: f64,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical machinery rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature(_) | Error::SeriesDivergence { .. } | Error::TailBound { .. }
        )
    }
}

pub(crate) fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value.is_nan() || value < lo || value > hi {
        Err(Error::OutOfDomain { name, value, lo, hi })
    } else {
        Ok(())
    }
}
