//! KeypointNet-style annotation ingestion.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Point3;
use serde::Deserialize;

use super::EvalError;
use crate::geometry::TriangleMesh;
use crate::keypoints::AnnotatedShape;

#[derive(Debug, Deserialize)]
struct RawKeypoint {
    xyz: [f64; 3],
    semantic_id: u32,
}

#[derive(Debug, Deserialize)]
struct RawShape {
    class_id: String,
    model_id: String,
    keypoints: Vec<RawKeypoint>,
}

/// One annotated shape with its resolved mesh file.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeEntry {
    pub shape_id: String,
    pub mesh_path: PathBuf,
    pub keypoints: Vec<(u32, Point3<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedShape {
    pub shape_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeypointDatasetIndex {
    /// Class name → shapes in file order.
    pub classes: BTreeMap<String, Vec<ShapeEntry>>,
    pub skipped: Vec<SkippedShape>,
}

impl KeypointDatasetIndex {
    pub fn shape_count(&self) -> usize {
        self.classes.values().map(Vec::len).sum()
    }

    pub fn find(&self, shape_id: &str) -> Option<(&str, &ShapeEntry)> {
        self.classes
            .iter()
            .find_map(|(c, shapes)| shapes.iter().find(|s| s.shape_id == shape_id).map(|s| (c.as_str(), s)))
    }
}

/// Readable names for the common synset ids; anything else keeps its id.
pub fn class_name(class_id: &str) -> String {
    match class_id {
        "02691156" => "airplane",
        "03001627" => "chair",
        "04379243" => "table",
        other => other,
    }
    .to_string()
}

fn resolve_mesh(root: &Path, class_id: &str, model_id: &str) -> Option<PathBuf> {
    [
        root.join(class_id).join(format!("{model_id}.obj")),
        root.join(class_id).join(model_id).join("models").join("model_normalized.obj"),
        root.join(format!("{model_id}.obj")),
    ]
    .into_iter()
    .find(|p| p.is_file())
}

/// Parse an annotation file (a JSON array of `{class_id, model_id,
/// keypoints: [{xyz, semantic_id, ..}]}` records) and resolve each mesh
/// under `mesh_root`. Shapes without a mesh file are skipped and reported.
pub fn load_annotations(path: impl AsRef<Path>, mesh_root: impl AsRef<Path>) -> Result<KeypointDatasetIndex, EvalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    let raw: Vec<RawShape> = serde_json::from_str(&text).map_err(|e| EvalError::Annotation(e.to_string()))?;
    let mut index = KeypointDatasetIndex::default();
    for shape in raw {
        let Some(mesh_path) = resolve_mesh(mesh_root.as_ref(), &shape.class_id, &shape.model_id) else {
            log::warn!("no mesh for shape {}; skipped", shape.model_id);
            index.skipped.push(SkippedShape {
                shape_id: shape.model_id,
                reason: "mesh file not found".into(),
            });
            continue;
        };
        index.classes.entry(class_name(&shape.class_id)).or_default().push(ShapeEntry {
            shape_id: shape.model_id,
            mesh_path,
            keypoints: shape.keypoints.iter().map(|k| (k.semantic_id, Point3::from(k.xyz))).collect(),
        });
    }
    Ok(index)
}

/// Snap an entry's keypoints to mesh vertices; also returns each keypoint's
/// snap distance in semantic-id order.
pub fn snap_entry(entry: &ShapeEntry, mesh: &TriangleMesh) -> (AnnotatedShape, Vec<f64>) {
    let shape = AnnotatedShape::snapped(entry.shape_id.clone(), mesh, entry.keypoints.iter().copied());
    let dists = shape
        .keypoints
        .values()
        .map(|k| (mesh.vertices()[k.vertex] - k.position).norm())
        .collect();
    (shape, dists)
}
