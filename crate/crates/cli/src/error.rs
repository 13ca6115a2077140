//! Command errors and their process exit codes.

use std::io;
use std::path::Path;

use b23d_core::evaluation::EvalError;
use b23d_core::features::FeatureError;
use b23d_core::geometry::GeometryError;
use b23d_core::keypoints::KeypointError;
use b23d_core::views::ViewError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Exit code 1.
    #[error("{0}")]
    Io(String),
    /// Exit code 2.
    #[error("{0}")]
    BadMesh(String),
    /// Exit code 3.
    #[error("{0}")]
    Format(String),
    /// Exit code 4: missing or invalid inputs, including configuration.
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io(_) => 1,
            Self::BadMesh(_) => 2,
            Self::Format(_) => 3,
            Self::Input(_) => 4,
        }
    }

    pub fn io(path: &Path, e: io::Error) -> Self {
        let msg = format!("{}: {e}", path.display());
        if e.kind() == io::ErrorKind::NotFound {
            Self::Input(msg)
        } else {
            Self::Io(msg)
        }
    }

    /// Writing outputs never counts as a missing input.
    pub fn write(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Io(format!("cannot write {}: {e}", path.display()))
    }

    pub fn mesh(path: &Path, e: GeometryError) -> Self {
        Self::BadMesh(format!("{}: {e}", path.display()))
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        let msg = e.to_string();
        match e {
            FeatureError::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => Self::Input(msg),
            FeatureError::Io { .. } => Self::Io(msg),
            FeatureError::BadMagic
            | FeatureError::UnsupportedVersion(_)
            | FeatureError::Truncated { .. }
            | FeatureError::TrailingBytes
            | FeatureError::NonFinite
            | FeatureError::EmptyMap
            | FeatureError::DimensionMismatch { .. } => Self::Format(msg),
            FeatureError::NoVisiblePoints => Self::BadMesh(msg),
            _ => Self::Input(msg),
        }
    }
}

impl From<ViewError> for CliError {
    fn from(e: ViewError) -> Self {
        let msg = e.to_string();
        match e {
            ViewError::Io(source) if source.kind() == io::ErrorKind::NotFound => Self::Input(msg),
            ViewError::Io(_) => Self::Io(msg),
            ViewError::Manifest { .. } => Self::Format(msg),
            _ => Self::Input(msg),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        Self::BadMesh(e.to_string())
    }
}

impl From<KeypointError> for CliError {
    fn from(e: KeypointError) -> Self {
        match e {
            KeypointError::Geometry(g) => g.into(),
            KeypointError::DimensionMismatch { .. } => Self::Format(e.to_string()),
            other => Self::Input(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        let msg = e.to_string();
        match e {
            EvalError::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => Self::Input(msg),
            EvalError::Io { .. } | EvalError::Csv(_) => Self::Io(msg),
            EvalError::Annotation(_) | EvalError::Labels(_) | EvalError::DimensionMismatch { .. } => Self::Format(msg),
            EvalError::Feature(f) => f.into(),
            EvalError::Geometry(g) => g.into(),
            EvalError::View(v) => v.into(),
            _ => Self::Input(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
