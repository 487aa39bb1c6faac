use thiserror::Error;

use crate::sdp::SdpSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("label `{0}` appears on both operands")]
    LabelCollision(String),
    #[error("label `{0}` not found in layout")]
    LabelNotFound(String),
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("shape error: {0}")]
    ShapeError(String),
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),
    #[error("totals differ: {0} vs {1}")]
    TotalMismatch(f64, f64),
    #[error("empty input")]
    EmptyInput,
    #[error("outside the domain: {0}")]
    DomainError(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("solver stopped after {} iterations with gap {gap:.3e}", best.iterations)]
    Unconverged { best: Box<SdpSolution>, gap: f64 },
    #[error("problem is infeasible: {0}")]
    Infeasible(String),
    #[error("subset {subset:?}: {source}")]
    Subset { subset: Vec<(usize, usize)>, source: Box<Error> },
    #[error("{cells} cells exceed the exhaustive-enumeration limit of {limit}")]
    TooManyCells { cells: usize, limit: usize },
}
