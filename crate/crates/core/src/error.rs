use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Position-tagged failure while reading a contour.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("action {action} is not available in observable state {state}")]
    InvalidAction { state: String, action: String },

    #[error("inconsistent observation: {0}")]
    InconsistentObservation(String),

    #[error("no actions at terminal state {0}")]
    Terminal(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("oracle requires deterministic observation (observation noise is {0})")]
    NondeterministicOracle(f64),

    #[error("contour parse error: {0}")]
    Parse(#[from] ParseError),

    #[error("malformed table: {0}")]
    Table(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
