use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box ({cx}, {cy}, {w}, {h}): width and height must be positive and all fields finite")]
    InvalidBox { cx: f64, cy: f64, w: f64, h: f64 },

    /// A state estimate decoded to a box with non-positive width or height.
    #[error("state decodes to non-positive size (w = {w}, h = {h})")]
    NonPositiveSize { w: f64, h: f64 },

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("non-finite mean vector")]
    NonFiniteMean,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sampling period must be positive and finite, got {0}")]
    InvalidDt(f64),

    #[error("noise standard deviation must be finite and non-negative, got {0}")]
    InvalidSigma(f64),

    /// Innovation covariance is not positive definite or its condition number exceeds the limit.
    #[error("innovation covariance is numerically singular (condition number {condition:e})")]
    SingularInnovation { condition: f64 },

    #[error("frame {frame} arrived after frame {last}")]
    OutOfOrderFrame { frame: u64, last: u64 },

    #[error("detection for frame {detection} passed to step for frame {frame}")]
    FrameMismatch { frame: u64, detection: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("covariance estimation needs at least 2 samples, got {0}")]
    InsufficientSamples(usize),

    #[error("{}: no detection rows", path.display())]
    EmptyInput { path: PathBuf },

    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
