//! Per-view feature maps, back-projection onto mesh points, surface
//! smoothing and PCA colouring.

mod aggregate;
mod format;
mod pca;
mod provider;

pub use aggregate::{
    backproject, gaussian_reweight, gaussian_reweight_mesh, lift_features, mean_class_token, LiftOptions, Lifted,
};
pub use format::{
    load_feature_map, load_point_features, read_feature_map, read_point_features, save_feature_map,
    save_point_features, write_feature_map, write_point_features, FORMAT_VERSION, MAGIC,
};
pub use pca::pca_rgb;
pub use provider::{
    ConstantProvider, FeatureProvider, FileProvider, ProviderId, SynthNormalProvider, SynthPositionProvider,
    ViewContext,
};

use thiserror::Error;

/// Default Gaussian width for surface smoothing, in unit-box units.
pub const DEFAULT_SIGMA: f64 = 0.003;
/// Default patch grid (a 224 image split into 14-pixel patches).
pub const DEFAULT_GRID: u32 = 16;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic bytes, not a feature-map file")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated: expected {expected} bytes of payload, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("trailing bytes after payload")]
    TrailingBytes,
    #[error("non-finite feature value")]
    NonFinite,
    #[error("feature map has an empty grid or zero dimension")]
    EmptyMap,
    #[error("view {view}: feature dimension {found} differs from {expected}")]
    DimensionMismatch { view: u32, expected: usize, found: usize },
    #[error("no feature map for view {0}")]
    MissingView(u32),
    #[error("no point is visible in any view")]
    NoVisiblePoints,
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("distance matrix does not cover the {0} points")]
    CoverageMismatch(usize),
    #[error("pca needs at least 3 points and 3 dimensions")]
    TooSmallForPca,
    #[error("fit index {0} out of range")]
    FitIndex(usize),
}

impl FeatureError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Dense `rows × cols × dim` patch features of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub view_id: u32,
    rows: u32,
    cols: u32,
    dim: u32,
    values: Vec<f32>,
    class_token: Option<Vec<f32>>,
}

impl FeatureMap {
    pub fn new(
        view_id: u32,
        rows: u32,
        cols: u32,
        dim: u32,
        values: Vec<f32>,
        class_token: Option<Vec<f32>>,
    ) -> Result<Self, FeatureError> {
        if rows == 0 || cols == 0 || dim == 0 {
            return Err(FeatureError::EmptyMap);
        }
        let expected = rows as usize * cols as usize * dim as usize;
        if values.len() != expected {
            return Err(FeatureError::Truncated {
                expected,
                found: values.len(),
            });
        }
        if let Some(tok) = &class_token {
            if tok.len() != dim as usize {
                return Err(FeatureError::DimensionMismatch {
                    view: view_id,
                    expected: dim as usize,
                    found: tok.len(),
                });
            }
        }
        let all_finite = values.iter().chain(class_token.iter().flatten()).all(|v| v.is_finite());
        if !all_finite {
            return Err(FeatureError::NonFinite);
        }
        Ok(Self {
            view_id,
            rows,
            cols,
            dim,
            values,
            class_token,
        })
    }

    /// Map with every patch set to `value`.
    pub fn constant(view_id: u32, rows: u32, cols: u32, value: &[f32]) -> Result<Self, FeatureError> {
        let values = value.repeat(rows as usize * cols as usize);
        Self::new(view_id, rows, cols, value.len() as u32, values, None)
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn class_token(&self) -> Option<&[f32]> {
        self.class_token.as_deref()
    }

    pub fn patch(&self, row: u32, col: u32) -> &[f32] {
        let d = self.dim as usize;
        let start = (row as usize * self.cols as usize + col as usize) * d;
        &self.values[start..start + d]
    }
}

/// Patch containing pixel position `(x, y)`, clamped to the grid.
pub fn pixel_to_patch(x: f64, y: f64, width: u32, height: u32, rows: u32, cols: u32) -> (u32, u32) {
    let clamp = |v: f64, n: u32| (v.floor().max(0.0) as u32).min(n - 1);
    (
        clamp(y * rows as f64 / height as f64, rows),
        clamp(x * cols as f64 / width as f64, cols),
    )
}

/// Per-point features with the number of views each point was seen in.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFeatureSet {
    dim: usize,
    values: Vec<f64>,
    counts: Vec<u32>,
    pub provider: String,
    /// Smoothing width if the set was re-weighted.
    pub sigma: Option<f64>,
}

impl PointFeatureSet {
    pub fn new(dim: usize, values: Vec<f64>, counts: Vec<u32>, provider: impl Into<String>) -> Self {
        assert_eq!(values.len(), dim * counts.len(), "values must be N×d");
        Self {
            dim,
            values,
            counts,
            provider: provider.into(),
            sigma: None,
        }
    }

    /// All points counted as seen once; convenient for features that did not
    /// come from back-projection.
    pub fn from_rows(dim: usize, values: Vec<f64>) -> Self {
        let n = values.len() / dim.max(1);
        Self::new(dim, values, vec![1; n], "external")
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_observed(&self, i: usize) -> bool {
        self.counts[i] > 0
    }

    /// Rows for the given point indices, in order.
    pub fn select(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect()
    }
}
