use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter for {kind}: {reason}")]
    InvalidParam { kind: String, reason: String },

    #[error("input must be finite, got {0}")]
    NonFiniteInput(f64),

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("x = {x} lies within {band} of the kink at {kink}")]
    KinkProximity { x: f64, kink: f64, band: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("cache was produced by a different network state")]
    StaleCache,

    #[error("training diverged at round {round}, batch {batch}: {what}")]
    Divergence {
        round: usize,
        batch: usize,
        what: String,
    },

    #[error("{0} is not a stochastic activation")]
    NotStochastic(String),

    #[error("io: {0}")]
    Io(String),

    #[error("format: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn param(kind: impl ToString, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            kind: kind.to_string(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
