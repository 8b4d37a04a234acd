use alloc::string::String;
use core::fmt;

/// Errors raised by the optimizer, the estimators and the experiment driver.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A constructor or configuration received an invalid value.
    InvalidArgument(String),
    /// Two inputs that must agree in length or dimension did not.
    DimensionMismatch { expected: usize, found: usize },
    /// A fitness or objective value was NaN or infinite.
    NonFiniteValue(f64),
    /// The eigendecomposition of the covariance did not converge or produced
    /// a non-positive eigenvalue.
    DegenerateCovariance,
    /// The covariance is too ill-conditioned for a trustworthy Mahalanobis distance.
    IllConditioned { condition: f64 },
    /// The objective (simulator) failed for a point.
    Simulation(String),
    /// Strategy comparison was asked to mix traces from different problems.
    ProblemMismatch(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NonFiniteValue(v) => write!(f, "non-finite value: {v}"),
            Error::DegenerateCovariance => write!(f, "covariance eigendecomposition failed"),
            Error::IllConditioned { condition } => {
                write!(f, "covariance condition number {condition:e} exceeds 1e14")
            }
            Error::Simulation(msg) => write!(f, "simulation failed: {msg}"),
            Error::ProblemMismatch(msg) => write!(f, "problem mismatch: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
