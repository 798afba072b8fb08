use crate::data_model::ChannelId;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // ingestion / alignment
    #[error("no valid rows in input")]
    EmptyFile,
    #[error("unexpected CSV header {found:?}, expected {expected:?}")]
    HeaderMismatch { expected: String, found: String },
    #[error(
        "raw series extends past grid end (point at minute {minute}, grid ends at {grid_end})"
    )]
    GridOverflow { minute: i64, grid_end: i64 },
    #[error("raw series starts before grid origin (minute {minute} < origin {origin})")]
    BeforeOrigin { minute: i64, origin: i64 },
    #[error("series grids differ: {0}")]
    GridMismatch(String),
    #[error("channel {0} supplied more than once")]
    DuplicateChannel(ChannelId),
    #[error("recording has no {0} channel")]
    MissingChannel(ChannelId),
    #[error("unknown channel name {0:?}")]
    UnknownChannel(String),
    #[error("timestamp {0} is before the epoch or malformed")]
    BadTimestamp(String),

    // generator
    #[error("invalid synthetic parameters: {0}")]
    InvalidParams(String),

    // preprocessing
    #[error("too few valid samples: need {needed}, have {have}")]
    TooFewSamples { needed: usize, have: usize },
    #[error("light channel contains negative lux value {0}")]
    NegativeLux(f64),

    // cosinor
    #[error("CBT span of {span_minutes} min is below the required {required_minutes} min")]
    InsufficientSpan {
        span_minutes: i64,
        required_minutes: i64,
    },
    #[error("cosinor normal equations are singular")]
    SingularSystem,
    #[error("cosinor fit has zero amplitude; phase is undefined")]
    DegenerateFit,

    // circular
    #[error("non-finite phase value")]
    NonFinite,
    #[error("cannot decode phase from the zero vector")]
    ZeroVector,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,

    // features
    #[error("window has {0} valid points, need at least 2")]
    TooFewPoints(usize),
    #[error("no feature rows produced for participant {0}")]
    NoCoverage(String),
    #[error("invalid window configuration: {0}")]
    InvalidWindow(String),

    // models
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("feature dimension mismatch: model expects {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unsupported model format: {0}")]
    ModelFormat(String),

    // evaluation
    #[error("need at least {needed} participants, have {have}")]
    TooFewParticipants { needed: usize, have: usize },
    #[error("fold {0} has no test rows")]
    EmptyFold(usize),
    #[error("train/test participant sets overlap in fold {0}")]
    Leakage(usize),
    #[error("stratum {0} has no samples")]
    EmptyStratum(&'static str),
    #[error("unknown participant {0:?}")]
    UnknownParticipant(String),

    // configuration
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by a bad configuration rather than bad data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidParams(_)
                | Error::InvalidHyperparams(_)
                | Error::InvalidWindow(_)
                | Error::UnknownChannel(_)
                | Error::UnknownParticipant(_)
        )
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
