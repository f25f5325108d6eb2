//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: residual {residual:.3e} exceeds {tol:.3e}")]
    NotHermitian { residual: f64, tol: f64 },

    #[error("ambient dimensions differ: {left} vs {right}")]
    AmbientMismatch { left: usize, right: usize },

    #[error("operand shapes are incompatible: {0}")]
    ShapeMismatch(String),

    #[error("matrix entry at ({row},{col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("{which} is not a projection: Hermitian residual {hermitian:.3e}, idempotent residual {idempotent:.3e}")]
    NotProjection {
        which: &'static str,
        hermitian: f64,
        idempotent: f64,
    },

    #[error("iteration did not converge within {max_iter} steps (last update {last_delta:.3e})")]
    NoConvergence { max_iter: usize, last_delta: f64 },

    #[error("decomposition frames are inconsistent: {0}")]
    FrameInconsistency(String),

    #[error("representation spec does not match the operand: {0}")]
    SpecMismatch(String),

    #[error("Friedrichs angle {angle} leaves no contraction margin (require < 1 - {margin:.3e})")]
    AngleTooLarge { angle: f64, margin: f64 },

    #[error("invalid value: {0}")]
    Validation(String),
}
