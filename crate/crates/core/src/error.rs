use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library. Variants are split so callers can tell
/// bad input data (files) apart from bad parameters (validation).
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("{path}: not a decodable image: {message}")]
    NotAnImage { path: PathBuf, message: String },

    #[error("{path}: unsupported pixel format {found} (expected 8-bit RGB or RGBA)")]
    UnsupportedPixelFormat { path: PathBuf, found: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}:{column}: malformed point cloud entry: {message}")]
    PointCloudParse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("rotation angle {0} deg out of range (-90, 90)")]
    AngleOutOfRange(f64),

    #[error("view angle {0} deg out of range (-60, 60)")]
    ViewAngleOutOfRange(f64),

    #[error("direction has zero length")]
    ZeroDirection,

    #[error("projection axis grazes the film plane (|direction.z| = {0:.4} <= 0.05)")]
    GrazingAxis(f64),

    #[error("no patterns supplied")]
    EmptyPatternList,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// True for errors caused by unreadable or malformed input data,
    /// false for parameter/validation errors.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::FileNotFound(_)
                | Error::NotAnImage { .. }
                | Error::UnsupportedPixelFormat { .. }
                | Error::Io { .. }
                | Error::PointCloudParse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
