use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrlError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate instance: {0}")]
    Degenerate(String),
    #[error("cap exceeded: {0}")]
    Cap(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dual infeasible at edge {edge:?}: load {load}")]
    Infeasible { edge: Vec<u32>, load: String },
}

pub type Result<T> = std::result::Result<T, TrlError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(TrlError::InvalidInput(msg.into()))
}
