use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// Input data cannot be analyzed (empty, all zero, wrong length).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Every smoothing denominator in a frame vanished.
    #[error("frame has no signal power at any bin")]
    EmptyFrame,

    /// A time-derivative request had no frame at one of the paired times.
    #[error("no analysed frame at t = {0:.6} s for the time derivative")]
    MissingPairedFrame(f64),

    #[error("calibration failed: {0}")]
    Calibration(String),

    /// A calibration constant does not match the analysis configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("no voiced frames in the f0 track")]
    NoVoicing,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
