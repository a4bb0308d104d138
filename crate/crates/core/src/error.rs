use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{0}: no edges found")]
    EmptyInput(PathBuf),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("input matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),

    #[error("degenerate prior: {0}")]
    DegeneratePrior(String),

    #[error("fit failed: every pair was pruned")]
    AllPairsPruned,

    #[error("unknown node id {id:?} at line {line}")]
    UnknownNode { id: String, line: usize },

    #[error("duplicate node id {id:?} at line {line}")]
    DuplicateNode { id: String, line: usize },

    #[error("ground truth is missing nodes: {}", .0.join(", "))]
    MissingNodes(Vec<String>),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("empty labeling")]
    EmptyLabeling,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
