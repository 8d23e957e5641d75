use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("signal too short: {0}")]
    SignalTooShort(String),

    #[error("silent source: {0}")]
    SilentSource(String),

    #[error("exhaustive sign search limited to {max} bins, got {bins}")]
    BruteForceTooLarge { bins: usize, max: usize },

    #[error("wav format: {0}")]
    WavFormat(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
