use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid scene (line {line}): {msg}")]
    InvalidScene { line: usize, msg: String },

    #[error("solver start is not finite: {0}")]
    InvalidStart(String),

    #[error("not enough assigned paths: need {needed}, have {available}")]
    NotEnoughPaths { needed: usize, available: usize },

    #[error("no RANSAC iteration produced a feasible candidate")]
    NoConsensus,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
