use thiserror::Error;

/// Errors raised by the computational core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("integer overflow while building coefficient table at n = {0}")]
    Overflow(usize),
    #[error("coefficient table too short: need n up to {needed}, have {available}")]
    TableTooShort { needed: usize, available: usize },
    #[error("tolerance {tol:e} unachievable: best tail bound {best:e}")]
    ToleranceUnachievable { tol: f64, best: f64 },
    #[error("quadrature did not converge: error estimate {estimate:e}")]
    Quadrature { estimate: f64 },
    #[error("work bound exceeded: {0}")]
    WorkBound(String),
    #[error("cache file: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, Error>;
