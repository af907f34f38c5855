use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("vectors not orthonormal: Gram deviation {deviation:.3e} exceeds {tolerance:.1e}")]
    NotOrthonormal { deviation: f64, tolerance: f64 },

    #[error("matrix h[{index}] is not symmetric (asymmetry {asymmetry:.3e})")]
    NotSymmetric { index: usize, asymmetry: f64 },

    #[error("mean curvature vanishes (|H| = {norm:.3e}); no B1 frame exists")]
    ZeroMeanCurvature { norm: f64 },

    #[error("orthonormalization failed: Gram deviation {deviation:.3e}, condition number {condition:.3e}")]
    Orthonormalization { deviation: f64, condition: f64 },

    #[error("dimensions (m, k) = ({m}, {k}) not admissible: {reason}")]
    Inadmissible { m: usize, k: usize, reason: String },

    #[error("infeasible generator constraints: {0}")]
    Infeasible(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integration failed at t = {t}, u = {u}: {message}")]
    Integration { t: f64, u: f64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
