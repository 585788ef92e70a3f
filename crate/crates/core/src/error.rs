//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two series (or polynomials) that must share a truncation order do not.
    #[error("truncation order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("series has a vanishing constant term and cannot be inverted")]
    SingularSeries,

    #[error("starting value is not a simple root (|P'(y0)| = {derivative:e})")]
    NonSimpleRoot { derivative: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("operation not supported for scheme kind `{kind}`: {reason}")]
    UnsupportedKind { kind: &'static str, reason: &'static str },

    #[error("scheme is not consistent: {0}")]
    Inconsistent(String),

    #[error("invalid scheme definition: {0}")]
    InvalidScheme(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("construction failed: {0}")]
    ConstructionFailed(String),

    #[error("ambiguous branch continuation at theta = {theta}")]
    AmbiguousBranch { theta: f64 },

    #[error("no boundary branch passes through the origin")]
    NoTangency,

    #[error("tangency fit inconclusive (relative residual {relative_residual:e})")]
    InconclusiveFit { relative_residual: f64 },

    #[error("downwind space discretization (V = {coefficient}) is unconditionally unstable")]
    UnconditionallyUnstable { coefficient: f64 },

    #[error("system is not hyperbolic: eigenvalue with imaginary part {imag:e}")]
    NotHyperbolic { imag: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("history holds {available} states, the scheme needs {required}")]
    InsufficientHistory { available: usize, required: usize },

    #[error("could not bracket the maximal stable time step: {0}")]
    Bracketing(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}
