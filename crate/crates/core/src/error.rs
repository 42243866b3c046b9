use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degree {degree} exceeds the supported maximum {max}")]
    DegreeCap { degree: usize, max: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("schedule `{0}` needs the strong-convexity parameter mu")]
    MissingMu(String),

    #[error("iterate diverged at step {step}")]
    Divergence { step: usize },

    #[error("anchor coordinate {0} of v is zero")]
    ZeroAnchor(usize),

    #[error("objective is unbounded below")]
    UnboundedBelow,

    #[error("no convergence within {0} iterations")]
    NonConvergence(usize),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
