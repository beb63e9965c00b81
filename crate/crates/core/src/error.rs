use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid sample `{id}`: {reason}")]
    InvalidSample { id: String, reason: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no samples left for group `{0}`")]
    EmptyGroup(String),

    #[error("group `{group}`, class `{class}`: need {needed} samples, only {available} available")]
    Insufficient {
        group: String,
        class: String,
        needed: usize,
        available: usize,
    },

    #[error("sampling saturated in group `{group}`: placed {achieved} of {requested} points")]
    Saturation {
        group: String,
        achieved: usize,
        requested: usize,
    },

    #[error("no overlap: {0}")]
    NoOverlap(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("names do not align with the score table: {}", .0.join(", "))]
    Alignment(Vec<String>),

    #[error("raster error: {0}")]
    Raster(String),

    #[error(transparent)]
    Fetch(#[from] FetchError),
}

/// Failures of a single tile acquisition. These are per-sample outcomes during
/// ingestion rather than fatal errors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FetchError {
    #[error("no acceptable scene: {0}")]
    Unavailable(String),

    #[error("all {candidates} candidate scenes exceed {max_cloud_pct}% cloud cover (best {best_cloud_pct}%)")]
    CloudFilter {
        candidates: usize,
        best_cloud_pct: f64,
        max_cloud_pct: f64,
    },

    #[error("tile source failure: {0}")]
    Source(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<tiff::TiffError> for Error {
    fn from(e: tiff::TiffError) -> Self {
        Error::Raster(e.to_string())
    }
}
