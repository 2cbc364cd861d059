use thiserror::Error;

/// Errors raised by the engines, solvers and verification harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its physical or numerical domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A FENE spring evaluated at or beyond its maximum extension.
    #[error("FENE extension |n| = {extension} is outside the open ball of radius {n0}")]
    FeneDomain { extension: f64, n0: f64 },

    /// Two discretized objects that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The right-hand side of a cell problem does not integrate to zero.
    #[error("solvability condition violated: integral of right-hand side is {integral:e}")]
    Solvability { integral: f64 },

    /// A trajectory produced a non-finite value.
    #[error("non-finite state in trajectory {trajectory} at step {step}")]
    NonFinite { trajectory: usize, step: u64 },

    /// Adaptive step halving could not keep the state inside its domain.
    #[error("step size underflow after {halvings} halvings (dt = {dt:e})")]
    StepUnderflow { halvings: u32, dt: f64 },

    /// A density became negative beyond the allowed rounding slack.
    #[error("negative density {value:e} at cell {cell}")]
    NegativeDensity { value: f64, cell: usize },

    /// An iterative solver stopped before reaching its tolerance.
    #[error("solver did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { iterations: usize, residual: f64 },

    /// Too few samples for a meaningful estimate.
    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
