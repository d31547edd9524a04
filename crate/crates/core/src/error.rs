use thiserror::Error;

use crate::grid::HeightField;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid has {nodes} nodes, at least {min} are required")]
    GridTooSmall { nodes: usize, min: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("field length {got} does not match grid with {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },

    #[error("time step {dt:e} exceeds the explicit stability limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("tridiagonal system is singular or not diagonally dominant at row {row}")]
    SingularSystem {
        row: usize,
        snapshot: Box<HeightField>,
    },

    #[error("non-finite value at step {step} (t = {t}); last good field retained")]
    NonFinite {
        step: usize,
        t: f64,
        last_good: Box<HeightField>,
    },

    #[error(
        "Newton iteration did not converge: residual {residual:e} after {iterations} iterations"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("sigma continuation stalled at sigma = {last_sigma} (step fell below {min_step})")]
    ContinuationFailed { last_sigma: f64, min_step: f64 },

    #[error(
        "evaluation point outside the half-space of the tangent plane (lambda*y + z.e1 = {0})"
    )]
    OutsideHalfSpace(f64),

    #[error("{0}")]
    Refused(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
