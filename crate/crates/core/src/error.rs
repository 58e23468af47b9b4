use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("column {0} of the noise matrix is zero")]
    ZeroColumn(usize),

    #[error("index {index} out of range for {len} columns")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("enumeration over {n} binary variables refused (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("grid with {points} points exceeds the limit of {limit}")]
    GridTooLarge { points: u128, limit: u128 },

    #[error("point leaves the unit cube at coordinate {0}")]
    OutsideUnitCube(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
