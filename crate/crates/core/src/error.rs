use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An exponent outside `[1, +inf]`, or NaN.
    #[error("invalid exponent {0}: must lie in [1, inf]")]
    InvalidExponent(f64),

    /// An argument violates a type invariant or an operation precondition.
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    /// A formula needs a finite conjugate exponent but got `t* = inf`.
    #[error("conjugate exponent is infinite; choose t > 1")]
    InfiniteConjugate,

    /// Two block vectors with different shapes were combined.
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),

    /// The lower bound's preconditions (`lambda_1 >= 1/(n D^2)`, `r >= 1/n`) fail.
    #[error("lower bound precondition violated: {0}")]
    LowerBoundPrecondition(String),

    /// The symmetric eigensolver did not converge.
    #[error("symmetric eigensolver did not converge for a {0}x{0} matrix")]
    Eigensolver(usize),

    /// An iterative solver hit its iteration cap.
    #[error("solver did not converge after {iterations} iterations (relative gap {gap:e})")]
    NonConvergence { iterations: usize, gap: f64 },

    /// A Monte Carlo draw failed.
    #[error("draw {draw}: {source}")]
    Draw { draw: usize, source: Box<Error> },

    /// A grid sweep found no sign change.
    #[error("no crossing found in the supplied grid")]
    NoCrossing,

    /// An exact enumeration would be too large.
    #[error("exact computation too large: {0}")]
    TooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument { name, reason: reason.into() }
}
