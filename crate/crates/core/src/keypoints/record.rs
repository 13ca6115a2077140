//! Serializable prediction record, one per shape.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KeypointPrediction, Objective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordKeypoint {
    pub semantic_id: u32,
    pub vertex: usize,
    pub position: [f64; 3],
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub total: f64,
    pub feature: f64,
    pub distance: f64,
    pub reward: f64,
}

impl From<Objective> for LossRecord {
    fn from(o: Objective) -> Self {
        Self {
            total: o.total,
            feature: o.feature,
            distance: o.distance,
            reward: o.reward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub shape_id: String,
    pub keypoints: Vec<RecordKeypoint>,
    /// Semantic ids sharing one vertex.
    pub collapse_warnings: Vec<Vec<u32>>,
    pub loss: Option<LossRecord>,
}

impl PredictionRecord {
    pub fn new(shape_id: impl Into<String>, pred: &KeypointPrediction, loss: Option<Objective>) -> Self {
        Self {
            shape_id: shape_id.into(),
            keypoints: pred
                .keypoints
                .iter()
                .map(|k| RecordKeypoint {
                    semantic_id: k.semantic_id,
                    vertex: k.vertex,
                    position: [k.position.x, k.position.y, k.position.z],
                    score: k.score,
                })
                .collect(),
            collapse_warnings: pred.collapses.iter().map(|(_, ids)| ids.clone()).collect(),
            loss: loss.map(LossRecord::from),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes") + "\n"
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }
}
