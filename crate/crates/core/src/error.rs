use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("malformed WAV header: {0}")]
    MalformedWav(String),
    #[error("multi-channel WAV not supported ({0} channels)")]
    MultiChannel(u16),
    #[error("unsupported PCM bit depth: {0}")]
    UnsupportedBitDepth(u16),
    #[error("empty signal")]
    EmptySignal,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss during {phase} at epoch {epoch}")]
    NonFiniteLoss { phase: &'static str, epoch: usize },
    #[error("class label {label} out of range (n_classes = {n_classes})")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("training data contains fewer than two classes")]
    SingleClass,
    #[error("class {class} has only {available} trials, need {needed}")]
    InsufficientTrials {
        class: usize,
        available: usize,
        needed: usize,
    },
    #[error("model file error: {0}")]
    ModelFormat(String),
    #[error("unknown sweep parameter: {0}")]
    UnknownSweepParam(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
