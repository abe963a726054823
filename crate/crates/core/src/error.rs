use thiserror::Error;

use crate::hum::HumResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty or invalid domain: {0}")]
    Domain(String),

    #[error("weight is singular at {0}")]
    Singularity(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("linear solver breakdown at step {step}: {detail}")]
    Solver { step: usize, detail: String },

    #[error("internal inconsistency: {0}")]
    Inconsistency(String),

    /// The Krylov iteration ran out of iterations. The partial result is kept
    /// so callers can still inspect the residual trace.
    #[error("conjugate residual iteration did not reach tolerance after {} iterations", .0.iterations)]
    NotConverged(Box<HumResult>),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
