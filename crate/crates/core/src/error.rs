use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate weight vector")]
    DegenerateWeights,
    #[error("empty particle cloud")]
    EmptyCloud,
    #[error("resample count must be at least 1")]
    ZeroResampleCount,
    #[error("bearing undefined at the sensor origin")]
    BearingUndefined,
    #[error("no feasible assignment for target {0}")]
    NoFeasibleAssignment(usize),
    #[error("association enumeration of {count} exceeds limit {limit}")]
    CombinatorialLimit { count: u128, limit: u128 },
    #[error("cost matrix is not square ({rows} rows, row {row} has {len} columns)")]
    NonSquare { rows: usize, row: usize, len: usize },
    #[error("every posterior association has zero weight")]
    DegeneratePosterior,
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
