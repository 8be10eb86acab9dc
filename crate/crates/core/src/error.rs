use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed RIFF/WAVE container: {0}")]
    MalformedContainer(String),

    #[error("unsupported audio encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("audio contains no samples")]
    EmptyAudio,

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("table rows do not match the header: {0}")]
    TableSchema(String),

    #[error("serialization failure: {0}")]
    Serialization(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("signal of {len} samples is shorter than one frame ({frame_len} samples)")]
    SignalTooShort { len: usize, frame_len: usize },

    #[error("frame of {len} samples is too short (need at least {min})")]
    FrameTooShort { len: usize, min: usize },

    #[error("FFT size {fft_size} must be a power of two no smaller than the frame ({frame_len} samples)")]
    BadFftSize { fft_size: usize, frame_len: usize },

    #[error("quefrency index 0 has no frequency interpretation")]
    ZeroQuefrency,

    #[error(
        "frame of {len} samples cannot hold two periods of {f_min_hz} Hz (need {needed} samples)"
    )]
    FrameTooShortForBand {
        len: usize,
        needed: usize,
        f_min_hz: f64,
    },

    #[error("degenerate filterbank: {0}")]
    DegenerateBank(String),

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("feature matrix has no frames")]
    EmptyFeatures,

    #[error("no codebook models available")]
    NoModels,

    #[error("malformed codebook: {0}")]
    MalformedCodebook(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with a human-readable location (file, frame, label).
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
