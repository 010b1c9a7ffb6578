use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("term is not ground")]
    NonGround,
    #[error("unknown symbol `{0}` with arity {1}")]
    ForeignSymbol(String, usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableauError {
    #[error("problem has no start clauses")]
    NoStartClause,
    #[error("illegal action {0}")]
    IllegalAction(String),
    #[error("search space exceeds {0} nodes")]
    BudgetExceeded(usize),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record {index}: {message}")]
    Malformed { index: usize, message: String },
    #[error("format version {found} does not match expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

impl StoreError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        StoreError::Io { path: path.into(), source }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("allowed probability mass must lie in {0}, got {1}")]
    AcceptedMass(&'static str, f64),
    #[error("allowed entry {0} has zero probability")]
    ZeroAllowed(usize),
    #[error("no allowed labels")]
    NoAllowed,
    #[error("probability and mask lengths differ ({0} vs {1})")]
    Length(usize, usize),
    #[error("replay failed: {0}")]
    Replay(String),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at epoch {epoch} on sample `{problem}`")]
    NonFinite { epoch: usize, problem: String },
    #[error("no training samples")]
    Empty,
    #[error("unknown problem `{0}` referenced by a sample")]
    UnknownProblem(String),
    #[error(transparent)]
    Loss(#[from] LossError),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("invalid configuration: {0}")]
    Config(String),
}
