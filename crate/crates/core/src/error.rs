use thiserror::Error;

use crate::solver::SolveResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("conjugate gradient produced a non-finite value at iteration {iteration}")]
    NonFiniteCg { iteration: usize },

    /// The outer iteration produced a non-finite field. `partial` carries the
    /// last finite iterate and the history recorded up to that point.
    #[error("solver diverged at iteration {iteration}: {reason}")]
    Diverged {
        iteration: usize,
        reason: String,
        partial: Box<SolveResult>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
