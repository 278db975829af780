use thiserror::Error;

use crate::lp::LpError;

#[derive(Debug, Error)]
pub enum DantzigError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{0} is not supported for this loss")]
    UnsupportedLoss(&'static str),

    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),

    /// The constraint set is empty. `binding` names the constraint family
    /// responsible.
    #[error("program is infeasible: {binding} cannot be satisfied together with the gradient box")]
    Infeasible { binding: String },

    #[error("no iterate satisfied |grad|_inf <= r (best seen {best_grad_inf:.3e} vs r = {r:.3e}); try a larger r")]
    NoFeasibleIterate { r: f64, best_grad_inf: f64 },

    #[error("Huber residual {residual} lies within {margin} of the kink at +/-{clip}")]
    NearKink {
        residual: f64,
        clip: f64,
        margin: f64,
    },

    #[error("size cap exceeded: {0}")]
    SizeCap(String),
}

pub type Result<T> = std::result::Result<T, DantzigError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(DantzigError::InvalidInput(msg.into()))
}
