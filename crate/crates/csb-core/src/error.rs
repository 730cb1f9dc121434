//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by channel construction, protocol execution, fitting and
/// estimation.
#[derive(Debug, Error)]
pub enum CsbError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("curve too short: {len} points, need at least {min}")]
    CurveTooShort { len: usize, min: usize },
    #[error("depth grid must be the contiguous integers 0..=L_max")]
    NonUniformGrid,
    #[error("fit contains no terms")]
    EmptyFit,
    #[error("no eigenvalue estimates survived filtering")]
    NoKeptEigenvalues,
    #[error("calibration cannot reach target fidelity {target}")]
    UnreachableTarget { target: f64 },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CsbError {
    /// Process exit code for the CLI: 2 config error, 3 data error,
    /// 4 estimation failure.
    pub fn exit_code(&self) -> i32 {
        use CsbError::*;
        match self {
            Config(_) | InvalidParameter(_) | UnreachableTarget { .. } | InvalidGate(_)
            | InvalidChannel(_) => 2,
            Schema(_) | Io(_) | Json(_) | DimensionMismatch { .. } | NotSquare { .. }
            | CurveTooShort { .. } | NonUniformGrid => 3,
            EmptyFit | NoKeptEigenvalues | Numerical(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CsbError>;
