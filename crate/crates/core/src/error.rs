use thiserror::Error;

use mva_diff::DiffError;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("track `{id}` is degenerate: {msg}")]
    DegenerateTrack { id: String, msg: String },

    #[error("track `{id}` has non-increasing timestamps at t={t}")]
    UnorderedTrack { id: String, t: i64 },

    #[error("affine fit is rank deficient: {0}")]
    RankDeficient(String),

    #[error("degenerate bounds: {0}")]
    DegenerateBounds(String),

    #[error("target {0} has no valid timestep")]
    EmptyTarget(usize),

    #[error("no valid pairs to score")]
    NoValidPairs,

    #[error("ground truth is empty")]
    EmptyTruth,

    #[error("training diverged at epoch {epoch}, window {window}: {source}")]
    Diverged {
        epoch: usize,
        window: usize,
        #[source]
        source: DiffError,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Format { path: String, line: usize, msg: String },

    #[error(transparent)]
    Diff(#[from] DiffError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
