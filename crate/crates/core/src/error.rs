use std::path::PathBuf;

use thiserror::Error;

/// Every failure the toolkit can report.
///
/// Variants map one-to-one onto the failure classes of the pipeline stages so
/// that the CLI can translate them into stable exit codes and the C ABI into
/// status codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("{path}: expected a single channel, found {channels}")]
    Channel { path: PathBuf, channels: u16 },

    #[error("{path}: unsupported sample format ({reason})")]
    Format { path: PathBuf, reason: String },

    #[error("recording is silent: {0}")]
    SilentRecording(String),

    #[error("window error: {0}")]
    Window(String),

    #[error("spectrogram has {frames} frame(s); at least 2 are required")]
    InsufficientFrames { frames: usize },

    #[error("value {x} outside open interval ({a}, {b})")]
    Boundary { x: f64, a: f64, b: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("duplicate recording: {0}")]
    DuplicateRecording(String),

    #[error("year {year} outside configured span {first}..={last}")]
    YearRange { year: i32, first: i32, last: i32 },

    #[error("missing response: {0}")]
    MissingResponse(String),

    #[error("covariance error: {0}")]
    Covariance(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("chain {chain} diverged at iteration {iteration}: {reason}")]
    ChainDivergence {
        chain: usize,
        iteration: usize,
        reason: String,
    },

    #[error("need at least {required} draws, got {actual}")]
    InsufficientDraws { required: usize, actual: usize },

    #[error("metadata error: {0}")]
    Metadata(String),

    #[error("data hash mismatch: {0}")]
    HashMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
