use thiserror::Error;

/// Errors produced by index construction, search, tuning, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("non-finite value in vector {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("node id {id} out of range ({count} nodes)")]
    NodeOutOfRange { id: u32, count: usize },

    #[error("k = {k} exceeds the number of indexed vectors ({n})")]
    KTooLarge { k: usize, n: usize },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("no configuration satisfies the constraint; best available recall is {best_recall:.4}")]
    NoFeasibleConfig { best_recall: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
