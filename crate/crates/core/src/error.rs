use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed image at byte offset {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("manifest {path}, line {line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("pixel ({x}, {y}) lies outside the valid interior {region}")]
    Bounds { x: usize, y: usize, region: String },

    #[error("image of {width}x{height} has no valid centers at radius {radius}")]
    EmptyRegion {
        width: usize,
        height: usize,
        radius: f64,
    },

    #[error("scheme {text:?}, position {position}: {message}")]
    Scheme {
        text: String,
        position: usize,
        message: String,
    },

    #[error("cache entry for {sample} is corrupt: {message}")]
    Cache { sample: String, message: String },

    #[error("configuration {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("sample {sample}: {source}")]
    Sample {
        sample: String,
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

    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn in_sample(self, sample: impl Into<String>) -> Self {
        Error::Sample {
            sample: sample.into(),
            source: Box::new(self),
        }
    }
}
