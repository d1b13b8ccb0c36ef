use thiserror::Error;

/// Errors reported by the capacity library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-supplied configuration (shape parameters, dimensions, ranges).
    #[error("configuration error: {0}")]
    Config(String),

    /// Operation outside its mathematical domain (e.g. recurrent dimension).
    #[error("domain error: {0}")]
    Domain(String),

    /// Mismatched ambient dimensions between lattice objects.
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    /// A numerical routine failed to reach its accuracy contract.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A Monte Carlo sampler exhausted its node budget repeatedly.
    #[error("budget exceeded: {0}")]
    Budget(String),
}

pub type Result<T> = std::result::Result<T, Error>;
