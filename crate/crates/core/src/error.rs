use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("field has no support above the threshold")]
    EmptySupport,

    #[error("adaptive quadrature did not reach tolerance {tol:e} within {budget} subintervals (estimate {estimate:e})")]
    QuadratureFailure { tol: f64, budget: usize, estimate: f64 },

    #[error("m = 3 is mass critical: {0}")]
    MassCritical(&'static str),

    #[error("degenerate field: {0}")]
    DegenerateField(&'static str),

    #[error("requires the supercritical regime m > 3 (got m = {0})")]
    NotSupercritical(f64),

    #[error("initial energy {f0:e} is not below the steady-state energy {f_star:e}")]
    EnergyTooHigh { f0: f64, f_star: f64 },

    #[error("scaling is degenerate at m = 1")]
    DegenerateScaling,

    #[error("could not bracket a root: {0}")]
    BracketFailure(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("non-finite values encountered: {0}")]
    NumericalFailure(String),

    #[error("u_max is not monotonically decaying in the fitting window")]
    InsufficientDecay,

    #[error("singular linear system")]
    SingularMatrix,

    #[error("malformed snapshot {path:?}: {reason}")]
    Snapshot { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
