use thiserror::Error;

/// Errors raised by the estimators and their building blocks.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("not enough samples: need {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },

    /// The eigensolver gave up; `best` is the last iterate, `residual` its
    /// `‖Mv − λv‖₂`.
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        eigenvalue: f64,
        best: Vec<f64>,
    },

    #[error("candidate family has {count} members, limit is {limit}")]
    CandidateOverflow { count: u128, limit: u128 },

    #[error("no cluster is large enough to seed candidate means")]
    NoQualifyingClusters,

    #[error("quadrature did not reach tolerance {tolerance:e} (error estimate {estimate:e})")]
    QuadratureBudget { tolerance: f64, estimate: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidInput(msg()))
    }
}
