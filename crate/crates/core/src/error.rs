use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("FCIDUMP line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid integral set: {0}")]
    InvalidIntegrals(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("determinant space of size {size} exceeds cap {cap}")]
    CapExceeded { size: u128, cap: usize },

    #[error("{operation} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        operation: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("invalid 1RDM: {0}")]
    InvalidRdm(String),

    #[error("invalid occupations: {0}")]
    InvalidOccupations(String),

    #[error("invalid orbitals: {0}")]
    InvalidOrbitals(String),

    #[error("line search failed in {0}: step underflow")]
    LineSearch(&'static str),

    #[error(
        "no kappa bracket in [0, {kappa_max}]: delta(0) - target = {at_zero:.6e}, \
         delta(kappa_max) - target = {at_max:.6e}"
    )]
    NoBracket { kappa_max: f64, at_zero: f64, at_max: f64 },

    #[error("ill-conditioned fit: {0}")]
    IllConditionedFit(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
