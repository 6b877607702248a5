use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("{what} = {value} is outside {range}")]
    OutOfRange { what: String, value: f64, range: String },

    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("duplicate index {0}")]
    DuplicateIndex(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("feature groups are not a partition of 0..{n}: uncovered {uncovered:?}, duplicated {duplicated:?}")]
    Partition {
        n: usize,
        uncovered: Vec<usize>,
        duplicated: Vec<usize>,
    },

    #[error("exhaustive enumeration supports n <= {max}, got n = {n}; use greedy_subset instead")]
    Capacity { n: usize, max: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("training diverged at epoch {epoch} (loss = {loss}); try a smaller learning rate")]
    Divergence { epoch: usize, loss: f64 },

    #[error("point coordinate {index} = {value} is within {step} of the box boundary")]
    Margin { index: usize, value: f64, step: f64 },

    #[error("negative edge weight {weight} on edge {edge}")]
    NegativeWeight { edge: usize, weight: f64 },

    #[error("model is not trained: {0}")]
    Untrained(String),

    #[error("gradient oracle failed at step {step}: {source}")]
    Oracle {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dims(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        }
    }

    pub(crate) fn range(what: impl Into<String>, value: f64, range: impl Into<String>) -> Self {
        Error::OutOfRange {
            what: what.into(),
            value,
            range: range.into(),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::Oracle { .. } => e,
            e => Error::Oracle {
                step,
                source: Box::new(e),
            },
        }
    }
}
