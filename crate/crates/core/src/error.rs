use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by data loading, model training, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: requested channel {channel} but rows have only {columns} columns")]
    MissingChannel {
        path: PathBuf,
        channel: usize,
        columns: usize,
    },

    #[error("{path}: non-numeric value {value:?} at line {line}, column {column}")]
    NonNumericCell {
        path: PathBuf,
        line: usize,
        column: usize,
        value: String,
    },

    #[error("{path}: row at line {line} has {found} columns, expected {expected}")]
    RaggedRow {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: file contains no data rows")]
    EmptyRecordFile { path: PathBuf },

    #[error("sampling rate must be positive, got {0}")]
    InvalidSamplingRate(f64),

    #[error("window length must be a positive even number, got {0}")]
    InvalidWindowLength(usize),

    #[error("record of {samples} samples is shorter than one window of {window}")]
    RecordTooShort { samples: usize, window: usize },

    #[error("records have unequal lengths: channel {channel} has {found} samples, expected {expected}")]
    UnequalRecordLengths {
        channel: usize,
        expected: usize,
        found: usize,
    },

    #[error("split fractions must be non-negative and sum to 1, got {da}/{tune}/{test}")]
    InvalidSplit { da: f64, tune: f64, test: f64 },

    #[error("{segment} segment is empty: {windows} windows are too few for this split")]
    EmptySegment {
        segment: &'static str,
        windows: usize,
    },

    #[error("channel {channel}: window has zero mean amplitude and cannot be normalized")]
    DegenerateWindow { channel: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("{context}: expected length {expected}, got {found}")]
    LengthMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("{context}: expected {expected} channels, got {found}")]
    ChannelMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gradient for parameter tensor {tensor} is not finite at iteration {iteration}")]
    NonFiniteGradient { tensor: usize, iteration: u64 },

    #[error("no checkpoint satisfied the selection rule after {evals} evaluations: {reason}")]
    SelectionFailed { evals: u64, reason: String },

    #[error("malformed checkpoint {path}: {reason}")]
    CheckpointFormat { path: PathBuf, reason: String },

    #[error("all {count} tuning scores sit at the cap; the discriminator rejects every tuning window")]
    AllScoresCapped { count: usize },

    #[error("simulation diverged: state magnitude exceeded {limit:.1e} at step {step}")]
    UnstableSimulation { step: usize, limit: f64 },

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an io error with the path it occurred on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
