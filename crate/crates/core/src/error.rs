use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("unknown edge id {0}")]
    UnknownEdge(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("boundary vertices {0} and {1} are not connected")]
    Disconnected(usize, usize),
    #[error("syndrome is not supported by the erasure")]
    UnsupportedSyndrome,
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("search budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("parameters outside the valid regime: {0}")]
    OutOfRegime(String),
    #[error("no samples survive the cutoff")]
    NoSurvivors,
    #[error("empty input")]
    Empty,
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
