use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Capability(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("non-finite value at iteration {iter}: {what}")]
    NonFinite {
        iter: usize,
        what: String,
        last_iterate: Vec<f64>,
    },
    #[error("non-positive curvature at iteration {iter}")]
    Indefinite { iter: usize, best_iterate: Vec<f64> },
    #[error("inner solver stagnated at outer iteration {outer}: {detail}")]
    Stagnation {
        outer: usize,
        detail: String,
        last_iterate: Vec<f64>,
    },
    #[error("iterates diverged at iteration {iter} (|x| = {norm:e})")]
    Divergence { iter: usize, norm: f64 },
    /// ODE state left the finite range; carries the trajectory up to and
    /// including the last finite state.
    #[error("solution blew up at step {step} (t = {time})")]
    BlowUp {
        step: usize,
        time: f64,
        times: Vec<f64>,
        states: Vec<Vec<f64>>,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_check(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Shape(format!("{what}: expected length {expected}, got {got}")));
    }
    Ok(())
}
