use std::path::PathBuf;

/// Errors produced by the audit toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("value {value} outside the {scale} range [{low}, {high}]")]
    LabelRange {
        scale: &'static str,
        value: f64,
        low: f64,
        high: f64,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: sample {sample_id}: {message}")]
    ScaleViolation {
        path: PathBuf,
        line: usize,
        sample_id: String,
        message: String,
    },

    #[error("duplicate sample_id {sample_id} (first seen on line {first_line}, repeated on line {line})")]
    DuplicateSample {
        sample_id: String,
        first_line: usize,
        line: usize,
    },

    #[error("selection is empty: {0}")]
    EmptySelection(String),

    #[error("unsupported audio format in {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("invalid length: {0}")]
    InvalidLength(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("filter design: {0}")]
    FilterDesign(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("no prediction for sample {sample_id} variant {variant}")]
    MissingPrediction { sample_id: String, variant: String },

    #[error("protocol violation: {message} (offending message: {offending})")]
    Protocol { message: String, offending: String },

    #[error("incompatible predictor: {0}")]
    IncompatiblePredictor(String),

    #[error("external predictor session broken: {0}")]
    BrokenSession(String),

    #[error("predictor reported an error for {id}: {message}")]
    PredictorError { id: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
