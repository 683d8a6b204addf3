use std::path::PathBuf;

use thiserror::Error;

use crate::kg::Split;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: expected 3 tab-separated fields, found {found}")]
    Parse { file: String, line: usize, found: usize },

    #[error("{file}:{line}: duplicate triple within the {split} split")]
    DuplicateTriple { file: String, line: usize, split: Split },

    #[error("triple ({s}, {p}, {o}) appears in both the {first} and {second} splits")]
    CrossSplitDuplicate {
        s: String,
        p: String,
        o: String,
        first: Split,
        second: Split,
    },

    #[error("empty split: {0}")]
    EmptySplit(Split),

    #[error("{kind} id {id} out of range (count {count})")]
    IndexOutOfRange {
        kind: &'static str,
        id: usize,
        count: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: String },

    #[error("non-finite input to the simulator network")]
    NonFiniteInput,

    #[error("mrr of an empty rank list is undefined")]
    EmptyRanks,

    #[error("r-squared is undefined: {0}")]
    UndefinedRSquared(String),

    #[error("fraction {0} outside [0, 1)")]
    InvalidFraction(f64),

    #[error("missing ground truth for kg={kg} config={config} seed={seed}")]
    MissingGroundTruth { kg: String, config: String, seed: u64 },

    #[error("unknown knowledge graph '{0}'")]
    UnknownKg(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
