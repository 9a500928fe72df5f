use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("depth must be positive, got {0}")]
    DegenerateDepth(f64),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("image of {width}x{height} is too small for {levels} pyramid levels")]
    TooSmall {
        width: usize,
        height: usize,
        levels: usize,
    },

    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(f64),

    #[error("no valid ground-truth pixels at level {0}")]
    EmptyMask(usize),

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("no pixel of the camera sees the scene")]
    NoIntersection,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: non-finite value {value} at line {line}")]
    NonFiniteValue {
        path: PathBuf,
        line: usize,
        value: f64,
    },

    #[error("{path}: rotation is not orthonormal (deviation {deviation:e})")]
    NonOrthonormalRotation { path: PathBuf, deviation: f64 },

    #[error("{path}: unsupported format: {message}")]
    UnsupportedFormat { path: PathBuf, message: String },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(
        path: impl Into<PathBuf>,
        line: usize,
        column: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            column,
            message: message.into(),
        }
    }
}
