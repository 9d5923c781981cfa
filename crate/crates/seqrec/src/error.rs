//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rating scale: {0}")]
    Scale(String),

    #[error("rating vector: {0}")]
    Ratings(String),

    #[error("mask: {0}")]
    Mask(String),

    #[error("mask sequence: {0}")]
    MaskSequence(String),

    /// A mask was requested past the materialized horizon of an unsaturated
    /// sequence.
    #[error("mask undefined at time {want}: only {have} steps materialized and the sequence never saturates")]
    MaskHorizon { want: usize, have: usize },

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("estimator: {0}")]
    Estimator(String),

    #[error("schedule has no entry for n = {0}")]
    ScheduleGap(usize),

    #[error("generator: {0}")]
    Generator(String),

    #[error("theory: {0}")]
    Theory(String),

    #[error("experiment: {0}")]
    Experiment(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("config: {0}")]
    ConfigFormat(String),

    #[error("fixture line {line}: {message}")]
    Fixture { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
