use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value produced by op `{op}`")]
    NumericFailure { op: &'static str },

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("no flows left after filtering (threshold {threshold} bps)")]
    EmptyResult { threshold: f64 },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("infeasible budget: requested {requested} events, at most {max_achievable} achievable")]
    Infeasible { requested: usize, max_achievable: usize },

    #[error("training diverged at epoch {epoch}, sample {sample}")]
    TrainingFailure { epoch: usize, sample: usize },

    #[error("invalid synthetic spec: {0}")]
    Spec(String),

    #[error("missing artifact {path}: run `{prerequisite}` first")]
    MissingArtifact { path: PathBuf, prerequisite: &'static str },

    #[error("config hash mismatch for {path}: expected {expected}, found {found} (use --force to override)")]
    HashMismatch { path: PathBuf, expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_err<T>(op: &'static str, detail: impl Into<String>) -> Result<T> {
    Err(Error::Dimension { op, detail: detail.into() })
}
