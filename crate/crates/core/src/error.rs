use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("utterance too short: {len} samples, need at least {window}")]
    UtteranceTooShort { len: usize, window: usize },

    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate autocorrelation: r(0) = {0}")]
    DegenerateAutocorrelation(f64),

    #[error("non-finite reflection coefficient at stage {0}")]
    NonFiniteReflection(usize),

    #[error("degenerate gain: residual and noise variance are both zero")]
    DegenerateGain,

    #[error("diverged: {0}")]
    Diverged(String),

    #[error("all frames silent")]
    AllFramesSilent,

    #[error("silent signal: {0}")]
    SilentSignal(&'static str),

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("unsupported encoding in {path}: {reason}")]
    UnsupportedEncoding { path: PathBuf, reason: String },

    #[error("unsupported sample rate {rate} Hz in {path} (expected {expected} Hz)")]
    UnsupportedSampleRate {
        path: PathBuf,
        rate: u32,
        expected: u32,
    },

    #[error("bad manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(
        context: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    ) -> Self {
        Error::ShapeMismatch {
            context,
            expected,
            actual,
        }
    }
}
