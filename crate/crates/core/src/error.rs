use crate::prelude::*;

/// Error categories shared by every solver.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("integration error: {0}")]
    Integration(String),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("step budget exhausted after {0} events")]
    Budget(u64),
    #[error("backend mismatch: {0}")]
    BackendMismatch(String),
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("argument out of range: {0}")]
    Range(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("internal consistency error: {0}")]
    Consistency(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
}

impl Error {
    /// Short category name, stable across versions.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Integration(_) => "integration",
            Error::Sampling(_) => "sampling",
            Error::Config(_) => "config",
            Error::Budget(_) => "budget",
            Error::BackendMismatch(_) => "backend-mismatch",
            Error::LinearSolve(_) => "linear-solve",
            Error::Range(_) => "range",
            Error::Precondition(_) => "precondition",
            Error::Consistency(_) => "consistency",
            Error::NonConvergence { .. } => "non-convergence",
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
