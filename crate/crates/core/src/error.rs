use std::path::PathBuf;

use thiserror::Error;

/// Every failure the toolkit can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("parameters q={q}, r={r} fall inside the degeneracy band; use sme_dispatch")]
    DegenerateParams { q: f64, r: f64 },
    #[error("video has no frames")]
    EmptyVideo,
    #[error("need at least {needed} frames, got {got}")]
    InsufficientFrames { needed: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("corrupt dump {path}: {reason}")]
    CorruptDump { path: PathBuf, reason: String },
    #[error("schema error in {path}: {reason}")]
    SchemaError { path: PathBuf, reason: String },
    #[error("span error: {0}")]
    SpanError(String),
    #[error("natural and reversed slices differ in length ({natural} vs {reversed})")]
    SliceLengthMismatch { natural: usize, reversed: usize },
    #[error("manifest {path}, line {line}: {reason}")]
    ManifestError {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("no probability slices to score")]
    EmptySlice,
    #[error("method {0} needs target token ids but the dump has none")]
    MissingTargets(&'static str),
    #[error("evaluation needs both members and nonmembers (got {members} members, {nonmembers} nonmembers)")]
    DegenerateLabels { members: usize, nonmembers: usize },
    #[error("sample {sample_id}: {source}")]
    Sample {
        sample_id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the id of the sample it came from.
    pub fn for_sample(self, sample_id: impl Into<String>) -> Self {
        match self {
            e @ Error::Sample { .. } => e,
            e => Error::Sample {
                sample_id: sample_id.into(),
                source: Box::new(e),
            },
        }
    }
}
