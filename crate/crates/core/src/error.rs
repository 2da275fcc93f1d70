//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
    /// The gamma function was evaluated at a pole.
    #[error("gamma function pole at x = {0}")]
    Pole(f64),
    /// A geometry or configuration invariant does not hold.
    #[error("invalid parameter: {0}")]
    Invalid(String),
    /// The radius profile of a patch is not strictly positive.
    #[error("degenerate boundary: R_{patch} = {value} at x = {x}")]
    DegenerateBoundary { patch: usize, x: f64, value: f64 },
    /// Projection discarded more even content than the parity tolerance allows.
    #[error("parity leak {leak:e} exceeds tolerance {tol:e}")]
    ParityLeak { leak: f64, tol: f64 },
    /// γ₁ + γ₂ = 0 in co-rotating mode.
    #[error("zero total circulation: gamma1 + gamma2 = 0")]
    ZeroCirculation,
    /// A block of the trivial linearization cannot be inverted.
    #[error("singular block: {0}")]
    SingularBlock(String),
    /// A quadrature self-test failed.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    /// A residual probe produced a non-finite value.
    #[error("non-finite residual while {0}")]
    NonFinite(String),
    /// Newton reached the iteration cap.
    #[error("Newton did not converge in {iters} iterations (residual {residual:e})")]
    MaxIterations { iters: usize, residual: f64 },
    /// Newton could not reduce the residual at any admissible damping.
    #[error("Newton step failed to reduce the residual (residual {residual:e})")]
    NoDescent { residual: f64 },
    /// The Newton matrix is singular.
    #[error("singular Jacobian")]
    SingularJacobian,
    /// Not enough data for a fit or comparison.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// Configuration text could not be parsed.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    /// Configuration values violate an invariant.
    #[error("validation error at line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Result alias with the library error.
pub type Result<T> = std::result::Result<T, Error>;
