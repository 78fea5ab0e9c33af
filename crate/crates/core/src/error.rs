use thiserror::Error;

/// Errors raised by the solvers, the fitting routines and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Squared coefficient of variation requested for a law with zero mean.
    #[error("squared coefficient of variation is undefined for a zero-mean law")]
    UndefinedScv,

    #[error("moments outside the fitting family: {0}")]
    OutOfFamily(String),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    /// Singular or badly conditioned linear system.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// Solver output violates a probabilistic invariant by more than rounding.
    #[error("inconsistent solution: {0}")]
    Inconsistent(String),

    #[error("state out of range: {0}")]
    OutOfRange(String),

    #[error("insufficient run: {0}")]
    InsufficientRun(String),

    #[error("out of scope: {0}")]
    OutOfScope(String),
}

pub type Result<T> = std::result::Result<T, Error>;
