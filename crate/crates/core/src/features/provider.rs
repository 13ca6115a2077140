//! Sources of per-view feature maps.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::{Matrix3, Point3, Vector3};

use super::format::{feature_file_name, load_feature_map};
use super::{FeatureError, FeatureMap};
use crate::geometry::TriangleMesh;
use crate::raster::{ray_face_depth, FrameBuffers};
use crate::views::{Intrinsics, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProviderId {
    File,
    SynthPosition,
    SynthNormal,
    Constant,
}

impl ProviderId {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::File => "file",
            Self::SynthPosition => "synth-position",
            Self::SynthNormal => "synth-normal",
            Self::Constant => "constant",
        }
    }
}

impl fmt::Display for ProviderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProviderId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::File, Self::SynthPosition, Self::SynthNormal, Self::Constant]
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown provider `{s}`"))
    }
}

/// Everything a provider may look at when producing one view's map.
#[derive(Clone, Copy)]
pub struct ViewContext<'a> {
    pub mesh: &'a TriangleMesh,
    pub view: &'a View,
    pub intrinsics: &'a Intrinsics,
    pub buffers: &'a FrameBuffers,
}

pub trait FeatureProvider: Sync {
    fn id(&self) -> ProviderId;

    fn feature_map(&self, ctx: &ViewContext<'_>) -> Result<FeatureMap, FeatureError>;
}

/// Reads `<dir>/<view_id>.b23d`.
#[derive(Debug, Clone)]
pub struct FileProvider {
    pub dir: PathBuf,
}

impl FileProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl FeatureProvider for FileProvider {
    fn id(&self) -> ProviderId {
        ProviderId::File
    }

    fn feature_map(&self, ctx: &ViewContext<'_>) -> Result<FeatureMap, FeatureError> {
        let path = self.dir.join(feature_file_name(ctx.view.id));
        if !path.exists() {
            return Err(FeatureError::MissingView(ctx.view.id));
        }
        let mut map = load_feature_map(&path)?;
        if map.view_id != ctx.view.id {
            log::warn!(
                "{} declares view {} but is indexed as view {}",
                path.display(),
                map.view_id,
                ctx.view.id
            );
            map.view_id = ctx.view.id;
        }
        Ok(map)
    }
}

/// Same vector at every patch of every view.
#[derive(Debug, Clone)]
pub struct ConstantProvider {
    pub value: Vec<f32>,
    pub rows: u32,
    pub cols: u32,
}

impl FeatureProvider for ConstantProvider {
    fn id(&self) -> ProviderId {
        ProviderId::Constant
    }

    fn feature_map(&self, ctx: &ViewContext<'_>) -> Result<FeatureMap, FeatureError> {
        FeatureMap::constant(ctx.view.id, self.rows, self.cols, &self.value)
    }
}

/// Surface seen at each patch: the ray through the patch center when that
/// pixel is covered, else the covered pixel of the patch closest to the
/// center (ties in row-major order). Patches with no covered pixel are `None`.
fn patch_hits(ctx: &ViewContext<'_>, rows: u32, cols: u32) -> Vec<Option<(usize, Point3<f64>)>> {
    let (w, h) = (ctx.intrinsics.width(), ctx.intrinsics.height());
    let pose = &ctx.view.pose;
    let hit_at = |face: usize, x: f64, y: f64, px: u32, py: u32| {
        let depth = ray_face_depth(ctx.mesh, face, pose, ctx.intrinsics, x, y)
            .filter(|d| d.is_finite() && *d > 0.0)
            .unwrap_or_else(|| ctx.buffers.depth_at(px, py));
        (face, pose.eye() + pose.ray(ctx.intrinsics, x, y) * depth)
    };
    let mut hits = Vec::with_capacity(rows as usize * cols as usize);
    for r in 0..rows {
        for c in 0..cols {
            let x = (c as f64 + 0.5) * w as f64 / cols as f64;
            let y = (r as f64 + 0.5) * h as f64 / rows as f64;
            let (px, py) = ((x.floor() as u32).min(w - 1), (y.floor() as u32).min(h - 1));
            if let Some(face) = ctx.buffers.face_at(px, py) {
                hits.push(Some(hit_at(face, x, y, px, py)));
                continue;
            }
            let x0 = (c as u64 * w as u64 / cols as u64) as u32;
            let x1 = (((c + 1) as u64 * w as u64).div_ceil(cols as u64) as u32).min(w);
            let y0 = (r as u64 * h as u64 / rows as u64) as u32;
            let y1 = (((r + 1) as u64 * h as u64).div_ceil(rows as u64) as u32).min(h);
            let mut best: Option<(f64, u32, u32, usize)> = None;
            for qy in y0..y1 {
                for qx in x0..x1 {
                    let Some(face) = ctx.buffers.face_at(qx, qy) else { continue };
                    let d2 = (qx as f64 + 0.5 - x).powi(2) + (qy as f64 + 0.5 - y).powi(2);
                    if best.is_none_or(|b| d2 < b.0) {
                        best = Some((d2, qx, qy, face));
                    }
                }
            }
            hits.push(best.map(|(_, qx, qy, face)| hit_at(face, qx as f64 + 0.5, qy as f64 + 0.5, qx, qy)));
        }
    }
    hits
}

fn vector_map(
    ctx: &ViewContext<'_>,
    rows: u32,
    cols: u32,
    f: impl Fn(usize, &Point3<f64>) -> Vector3<f64>,
) -> Result<FeatureMap, FeatureError> {
    let values = patch_hits(ctx, rows, cols)
        .into_iter()
        .flat_map(|hit| {
            let v = hit.map_or_else(Vector3::zeros, |(face, p)| f(face, &p));
            [v.x as f32, v.y as f32, v.z as f32]
        })
        .collect();
    FeatureMap::new(ctx.view.id, rows, cols, 3, values, None)
}

/// Each patch stores the position of the surface seen at its center (see
/// `patch_hits` for partially covered patches), expressed through `frame` (identity for world coordinates). Background
/// patches are zero.
#[derive(Debug, Clone)]
pub struct SynthPositionProvider {
    pub rows: u32,
    pub cols: u32,
    pub frame: Matrix3<f64>,
}

impl SynthPositionProvider {
    pub fn new(rows: u32, cols: u32) -> Self {
        Self {
            rows,
            cols,
            frame: Matrix3::identity(),
        }
    }

    pub fn with_frame(mut self, frame: Matrix3<f64>) -> Self {
        self.frame = frame;
        self
    }
}

impl FeatureProvider for SynthPositionProvider {
    fn id(&self) -> ProviderId {
        ProviderId::SynthPosition
    }

    fn feature_map(&self, ctx: &ViewContext<'_>) -> Result<FeatureMap, FeatureError> {
        vector_map(ctx, self.rows, self.cols, |_, p| self.frame * p.coords)
    }
}

/// Each patch stores the normal of the face seen at its center.
#[derive(Debug, Clone)]
pub struct SynthNormalProvider {
    pub rows: u32,
    pub cols: u32,
    pub frame: Matrix3<f64>,
}

impl SynthNormalProvider {
    pub fn new(rows: u32, cols: u32) -> Self {
        Self {
            rows,
            cols,
            frame: Matrix3::identity(),
        }
    }

    pub fn with_frame(mut self, frame: Matrix3<f64>) -> Self {
        self.frame = frame;
        self
    }
}

impl FeatureProvider for SynthNormalProvider {
    fn id(&self) -> ProviderId {
        ProviderId::SynthNormal
    }

    fn feature_map(&self, ctx: &ViewContext<'_>) -> Result<FeatureMap, FeatureError> {
        let normals = ctx.mesh.face_normals();
        vector_map(ctx, self.rows, self.cols, |face, _| self.frame * normals[face])
    }
}
