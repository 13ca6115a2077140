//! Keypoint IoU curves, dataset ingestion, segmentation transfer and the
//! feature-stability sweeps.

mod dataset;
mod iou;
mod segmentation;
mod stability;

pub use dataset::{class_name, load_annotations, snap_entry, KeypointDatasetIndex, ShapeEntry, SkippedShape};
pub use iou::{
    default_thresholds, greedy_matching, iou_curve, iou_from_matches, keypoint_iou, mean_curve,
    mean_relative_improvement, mesh_pair_distances, optimal_match_count, shape_curve, write_curve_csv, IoUCurve, PairDistances,
};
pub use segmentation::{part_iou, segmentation_transfer, transfer_labels, SegmentationLabels};
pub use stability::{
    mean_cosine_similarity, stability_report, write_stability_csv, StabilityAxis, StabilityBase, StabilityRow,
};

use thiserror::Error;

use crate::features::FeatureError;
use crate::geometry::GeometryError;
use crate::views::ViewError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed annotation file: {0}")]
    Annotation(String),
    #[error("malformed labels: {0}")]
    Labels(String),
    #[error("source feature set is empty")]
    EmptySource,
    #[error("feature dimension {found} differs from {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vertex {0} is not indexed by the distance matrix")]
    NotInMatrix(usize),
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    View(#[from] ViewError),
}

impl EvalError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Six significant digits, trailing zeros trimmed.
pub fn format_float(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}
