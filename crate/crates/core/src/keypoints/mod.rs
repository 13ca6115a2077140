//! Few-shot keypoint detection: template building, the soft selection
//! optimization, argmax extraction and simple baselines.

mod baselines;
mod objective;
mod optimize;
mod record;
mod template;

pub use baselines::{fps_baseline, knn_match, mean_keypoint_count, retrieve_nearest_shape};
pub use objective::{exhaustive_selection, objective_and_gradient, row_softmax, selection_objective, Objective};
pub use optimize::{extract, hard_selection, optimize, OptimizationRun, OptimizerConfig, SelectionState};
pub use record::{LossRecord, PredictionRecord, RecordKeypoint};
pub use template::{
    build_template, candidate_set, keypoint_geodesics, AnnotatedKeypoint, AnnotatedShape, CandidateSet,
    FewShotTemplate, TemplateShape,
};

use nalgebra::Point3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KeypointError {
    #[error("no few-shot shapes given")]
    NoShapes,
    #[error("shape {0} has no annotated keypoints")]
    EmptyShape(String),
    #[error("shape {shape}: keypoint vertex {vertex} is outside the features or distances")]
    VertexNotCovered { shape: String, vertex: usize },
    #[error("feature dimension {found} differs from {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need more candidates ({n}) than keypoints ({k})")]
    TooFewCandidates { n: usize, k: usize },
    #[error("distance matrix must be square over the candidates")]
    DistanceShape,
    #[error("non-finite value at step {step}: {what}")]
    NonFinite { step: usize, what: &'static str },
    #[error("invalid optimizer setting: {0}")]
    Config(String),
    #[error("no class tokens to compare")]
    MissingTokens,
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// One detected keypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedKeypoint {
    pub semantic_id: u32,
    /// Row in the candidate set.
    pub candidate: usize,
    pub vertex: usize,
    pub position: Point3<f64>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointPrediction {
    pub keypoints: Vec<PredictedKeypoint>,
    /// Candidate rows claimed by more than one keypoint, with the semantic
    /// ids that share them.
    pub collapses: Vec<(usize, Vec<u32>)>,
}

impl KeypointPrediction {
    pub(crate) fn from_choices(cand: &CandidateSet, semantic_ids: &[u32], choices: &[(usize, f64)]) -> Self {
        let keypoints: Vec<PredictedKeypoint> = semantic_ids
            .iter()
            .zip(choices)
            .map(|(&semantic_id, &(candidate, score))| PredictedKeypoint {
                semantic_id,
                candidate,
                vertex: cand.vertices[candidate],
                position: cand.positions[candidate],
                score,
            })
            .collect();
        let mut collapses: Vec<(usize, Vec<u32>)> = Vec::new();
        for kp in &keypoints {
            match collapses.iter_mut().find(|(row, _)| *row == kp.candidate) {
                Some((_, ids)) => ids.push(kp.semantic_id),
                None => collapses.push((kp.candidate, vec![kp.semantic_id])),
            }
        }
        collapses.retain(|(_, ids)| ids.len() > 1);
        for (row, ids) in &collapses {
            log::warn!("keypoints {ids:?} collapse onto candidate {row}");
        }
        Self { keypoints, collapses }
    }

    pub fn vertices(&self) -> Vec<usize> {
        self.keypoints.iter().map(|k| k.vertex).collect()
    }

    pub fn candidates(&self) -> Vec<usize> {
        self.keypoints.iter().map(|k| k.candidate).collect()
    }
}
