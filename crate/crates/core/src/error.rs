use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("channel {channel} has zero variance")]
    ZeroVariance { channel: usize },

    #[error("lag {max_lag} out of range for a series of length {len}")]
    LagOutOfRange { max_lag: usize, len: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("segment window {window} too small, need at least {min} points")]
    WindowTooSmall { window: usize, min: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate segment {0}: all points identical")]
    DegenerateSegment(usize),

    #[error("regressor matrix is numerically rank deficient (singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("exponential rate {rate} over horizon {horizon} (dt {dt}) overflows")]
    OverflowUnsafe { rate: f64, dt: f64, horizon: usize },

    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("no scaling region found in the correlation integral")]
    NoScalingRegion,

    #[error("channel count mismatch: reference has {reference}, modeled has {modeled}")]
    ChannelMismatch { reference: usize, modeled: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }
}
