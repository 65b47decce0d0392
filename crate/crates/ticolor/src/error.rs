use std::path::PathBuf;

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no image pairs found under {0}")]
    EmptyDataset(PathBuf),
    #[error("stem {stem:?} matches multiple partners: {candidates:?}")]
    PairingAmbiguity { stem: String, candidates: Vec<PathBuf> },
    #[error("failed to decode {path}: {reason}")]
    DecodeError { path: PathBuf, reason: String },
    #[error("{path}: expected {expected} channels, got {got}")]
    ChannelMismatch { path: PathBuf, expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("discriminator is conditional but no condition was given")]
    ConditionMissing,
    #[error("image too small for {metric}: {width}x{height}, minimum {min}")]
    ImageTooSmall { metric: &'static str, width: usize, height: usize, min: usize },
    #[error("degenerate input for {0}")]
    DegenerateInput(&'static str),
    #[error("no counterpart for {0}")]
    MissingCounterpart(PathBuf),
    #[error("non-finite loss at epoch {epoch} iteration {iteration}: {detail}")]
    NonFiniteLoss { epoch: usize, iteration: usize, detail: String },
    #[error("checkpoint fingerprint {found} does not match config fingerprint {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("corrupt checkpoint {path}: {reason}")]
    CheckpointCorrupt { path: PathBuf, reason: String },
    #[error("bad config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Candle(#[from] candle_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
