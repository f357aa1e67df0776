use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported function family: {0}")]
    UnsupportedFamily(String),
    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),
    #[error("point lies within {tolerance:e} of a partition boundary")]
    BoundaryAmbiguity { tolerance: f64 },
    #[error("degenerate arrangement ({0}); re-perturb the hyperplanes")]
    Degenerate(String),
    #[error("construction failed: {0}; re-seed and retry")]
    ConstructionFailure(String),
    #[error("singular feature matrix: {0}; re-seed with generic points")]
    Singular(String),
    #[error("insufficient ADCs: need at least {needed}, got {available}")]
    InsufficientAdcs { needed: usize, available: usize },
    #[error("no candidate input satisfies the power limit {0}")]
    InfeasiblePower(f64),
    #[error("scenario violation: {0}")]
    ScenarioViolation(String),
    #[error("invalid code: {0}")]
    InvalidCode(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
