use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid SDE parameterization: {0}")]
    InvalidSpec(String),

    #[error("grid shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("non-finite value in grid at index {index}")]
    NonFinite { index: usize },

    #[error("drift singularity: BBED evaluated at t = {t} (must be below 1 - 1e-6)")]
    Singularity { t: f64 },

    #[error("time {t} outside [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Ei domain error: argument must be nonzero")]
    EiDomain,

    #[error("Ei overflow guard: |x| = {0} exceeds 700")]
    EiOverflow(f64),

    #[error("score variance degenerate at t = {t}")]
    DegenerateVariance { t: f64 },

    #[error("reverse trajectory diverged at t = {t}")]
    Diverged { t: f64 },

    #[error("signal too short: {len} samples, need at least {need}")]
    TooShort { len: usize, need: usize },

    #[error("silent signal: {0}")]
    Silent(&'static str),

    #[error("all segments are silent")]
    AllSegmentsSilent,

    #[error("external metric not configured: {0}")]
    MetricNotConfigured(String),

    #[error("external metric tool failed: {0}")]
    MetricTool(String),

    #[error("could not parse external metric output: {0:?}")]
    MetricParse(String),

    #[error("config error in {path:?}: {msg}")]
    Config { path: Option<PathBuf>, msg: String },

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
