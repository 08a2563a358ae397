use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid dyadic cube: {0}")]
    InvalidCube(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cubes not nested as required: {0}")]
    NotNested(String),
    #[error("cube set is empty")]
    EmptyCubeSet,
    #[error("cube {0} is not a member of the set")]
    NotMember(String),
    #[error("invalid haar index {index} for dimension {dim}")]
    InvalidIndex { index: usize, dim: usize },
    #[error("function is not constant on cell {0}")]
    CellTooCoarse(String),
    #[error("malformed grid: {0}")]
    MalformedGrid(String),
    #[error("function is identically zero")]
    ZeroFunction,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("hypothesis {hypothesis} violated: {detail}")]
    Hypothesis { hypothesis: String, detail: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("no admissible index at step 3: {0}")]
    NoAdmissibleIndex(String),
}

impl Error {
    pub fn hypothesis(hypothesis: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Hypothesis { hypothesis: hypothesis.into(), detail: detail.into() }
    }
}
