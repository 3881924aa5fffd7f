use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the reconstruction toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Non-finite or out-of-domain numeric input.
    #[error("domain error: {0}")]
    Domain(String),
    /// A point transformed into camera space has non-positive depth.
    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),
    /// Invalid argument or inconsistent shapes.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Nearest-neighbor query against a surface with no valid points.
    #[error("surface point set has no valid points")]
    EmptySurface,
    /// Point cloud evaluation or export with an empty cloud.
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("degenerate triangle (area {0:e})")]
    DegenerateTriangle(f64),
    #[error("at least 2 views are required, got {0}")]
    InsufficientViews(usize),
    #[error("voxel grid does not intersect the camera frustum")]
    GridOutsideFrustum,
    #[error("camera {0} does not see any scene geometry")]
    CameraNotViewing(usize),
    /// Malformed file content.
    #[error("{}:{line}: {msg}", path.display())]
    Format { path: PathBuf, line: usize, msg: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-parsable category used by the command-line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::BehindCamera(_) => "behind-camera",
            Error::InvalidInput(_) => "invalid-input",
            Error::EmptySurface => "empty-surface",
            Error::EmptyCloud => "empty-cloud",
            Error::DegenerateTriangle(_) => "degenerate-triangle",
            Error::InsufficientViews(_) => "insufficient-views",
            Error::GridOutsideFrustum => "grid-outside-frustum",
            Error::CameraNotViewing(_) => "camera-not-viewing",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format { path: path.into(), line, msg: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
