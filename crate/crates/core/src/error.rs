use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("unsupported image format in {}: {reason}", path.display())]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("corrupt image file {}: {reason}", path.display())]
    CorruptFile { path: PathBuf, reason: String },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("image too small: {0}")]
    ImageTooSmall(String),
    #[error("unnormalized co-occurrence matrix (sum of probabilities = {0})")]
    Unnormalized(f64),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("unknown class id {class} (mask has {classes} classes)")]
    UnknownClass { class: u8, classes: u8 },
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("regression undefined: {0}")]
    RegressionUndefined(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("image `{image}`: {source}")]
    Batch {
        image: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
