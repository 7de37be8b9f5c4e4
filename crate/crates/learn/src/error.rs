use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dim { what: &'static str, expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty batch")]
    EmptyBatch,
    #[error("cannot sample: {0}")]
    EmptyBuffer(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LearnError>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(LearnError::Dim { what, expected, got })
    }
}
