//! Pinhole cameras, look-at poses and the sphere-slice view rig.
//!
//! Conventions used throughout the crate: cameras look down their −Z axis,
//! image x grows to the right and image y grows downward, pixel `(i, j)`
//! covers `[i, i+1) × [j, j+1)` and the principal point defaults to the image
//! center.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ViewError {
    #[error("image size must be positive, got {0}x{1}")]
    EmptyImage(u32, u32),
    #[error("field of view must lie in (0, pi), got {0}")]
    FieldOfView(f64),
    #[error("eye and target coincide")]
    EyeAtTarget,
    #[error("camera distance must be positive, got {0}")]
    Distance(f64),
    #[error("manifest I/O: {0}")]
    Io(#[from] io::Error),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
}

/// Default raster and extractor resolution.
pub const DEFAULT_RESOLUTION: u32 = 224;
/// Default vertical field of view, 60 degrees.
pub const DEFAULT_FOV: f64 = PI / 3.0;
/// Default camera distance from the origin in normalized-mesh units.
pub const DEFAULT_DISTANCE: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    width: u32,
    height: u32,
    fov_y: f64,
    principal: (f64, f64),
}

impl Intrinsics {
    /// Intrinsics with the principal point at the image center.
    pub fn new(width: u32, height: u32, fov_y: f64) -> Result<Self, ViewError> {
        if width == 0 || height == 0 {
            return Err(ViewError::EmptyImage(width, height));
        }
        if !(fov_y > 0.0 && fov_y < PI) {
            return Err(ViewError::FieldOfView(fov_y));
        }
        Ok(Self {
            width,
            height,
            fov_y,
            principal: (width as f64 / 2.0, height as f64 / 2.0),
        })
    }

    pub fn with_principal_point(mut self, cx: f64, cy: f64) -> Self {
        self.principal = (cx, cy);
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn fov_y(&self) -> f64 {
        self.fov_y
    }

    pub fn principal_point(&self) -> (f64, f64) {
        self.principal
    }

    /// Focal length in pixels: `(height / 2) / tan(fov / 2)`.
    pub fn focal(&self) -> f64 {
        (self.height as f64 / 2.0) / (self.fov_y / 2.0).tan()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64
    }
}

impl Default for Intrinsics {
    fn default() -> Self {
        Self::new(DEFAULT_RESOLUTION, DEFAULT_RESOLUTION, DEFAULT_FOV).expect("valid defaults")
    }
}

/// World-to-camera rigid transform `x_cam = R x + T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// A projected point: pixel coordinates plus positive depth along the view
/// axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
}

impl CameraPose {
    pub fn to_camera(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.rotation * p.coords + self.translation
    }

    /// Camera center in world coordinates, `−Rᵀ T`.
    pub fn eye(&self) -> Point3<f64> {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    /// Unit viewing direction in world coordinates (camera −Z).
    pub fn forward(&self) -> Vector3<f64> {
        -self.rotation.row(2).transpose()
    }

    /// World-space direction of the ray through pixel `(x, y)`, scaled so its
    /// depth component is 1: `eye + depth * ray` is the point at that depth.
    pub fn ray(&self, intr: &Intrinsics, x: f64, y: f64) -> Vector3<f64> {
        let f = intr.focal();
        let (cx, cy) = intr.principal_point();
        let cam = Vector3::new((x - cx) / f, -(y - cy) / f, -1.0);
        self.rotation.transpose() * cam
    }

    /// Pose after rotating the world by `r` (the camera follows the world).
    pub fn rotated_with_world(&self, r: &Rotation3<f64>) -> Self {
        Self {
            rotation: self.rotation * r.matrix().transpose(),
            translation: self.translation,
        }
    }
}

/// Pinhole projection. Returns `None` when the point is on or behind the
/// camera plane (`depth <= 0`).
pub fn project(p: &Point3<f64>, pose: &CameraPose, intr: &Intrinsics) -> Option<Projection> {
    let c = pose.to_camera(p);
    let depth = -c.z;
    if depth <= 0.0 {
        return None;
    }
    let f = intr.focal();
    let (cx, cy) = intr.principal_point();
    Some(Projection {
        x: cx + f * c.x / depth,
        y: cy - f * c.y / depth,
        depth,
    })
}

/// Result of [`look_at`]; `fallback_up` is set when `up` was parallel to the
/// viewing direction and +X was substituted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LookAt {
    pub pose: CameraPose,
    pub fallback_up: bool,
}

/// Pose whose −Z axis points from `eye` toward `target`, with camera +Y as
/// close to `up` as possible.
pub fn look_at(
    eye: &Point3<f64>,
    target: &Point3<f64>,
    up: &Vector3<f64>,
) -> Result<LookAt, ViewError> {
    let forward = target - eye;
    if forward.norm() == 0.0 {
        return Err(ViewError::EyeAtTarget);
    }
    let forward = forward.normalize();
    let mut fallback_up = false;
    let mut side = forward.cross(up);
    if side.norm() < 1e-9 {
        fallback_up = true;
        side = forward.cross(&Vector3::x());
        if side.norm() < 1e-9 {
            side = forward.cross(&Vector3::y());
        }
    }
    let side = side.normalize();
    let cam_up = side.cross(&forward);
    let rotation = Matrix3::from_rows(&[
        side.transpose(),
        cam_up.transpose(),
        (-forward).transpose(),
    ]);
    let translation = -(rotation * eye.coords);
    Ok(LookAt {
        pose: CameraPose {
            rotation,
            translation,
        },
        fallback_up,
    })
}

/// One camera of a rig.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct View {
    pub id: u32,
    pub pose: CameraPose,
}

/// Cameras on a sphere around the origin, all looking at it.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewRig {
    pub views: Vec<View>,
    pub intrinsics: Intrinsics,
    pub n_slices: u32,
    pub distance: f64,
}

/// Number of views produced for `n` slices: `2n(n+1) + 2`.
pub fn view_count(n_slices: u32) -> usize {
    let n = n_slices as usize;
    2 * n * (n + 1) + 2
}

/// Sphere-slice rig: `n` horizontal slices at elevations
/// `−π/2 + i·π/(n+1)` (`i = 1..=n`), each with `2(n+1)` equiangular
/// azimuths starting at +Z, plus one top and one bottom view. World up is
/// +Y. View ids follow slice-major order with the top and bottom views last.
pub fn sample_viewpoints(
    n_slices: u32,
    distance: f64,
    intrinsics: Intrinsics,
) -> Result<ViewRig, ViewError> {
    if !(distance > 0.0) {
        return Err(ViewError::Distance(distance));
    }
    if distance <= 0.5 * 3f64.sqrt() {
        log::warn!("camera distance {distance} may place cameras inside the unit box");
    }
    let n = n_slices as usize;
    let per_slice = 2 * (n + 1);
    let mut eyes = Vec::with_capacity(view_count(n_slices));
    for i in 1..=n {
        let elevation = -FRAC_PI_2 + i as f64 * PI / (n + 1) as f64;
        for j in 0..per_slice {
            let azimuth = j as f64 * 2.0 * PI / per_slice as f64;
            eyes.push(Point3::new(
                distance * elevation.cos() * azimuth.sin(),
                distance * elevation.sin(),
                distance * elevation.cos() * azimuth.cos(),
            ));
        }
    }
    eyes.push(Point3::new(0.0, distance, 0.0));
    eyes.push(Point3::new(0.0, -distance, 0.0));
    let views = eyes
        .iter()
        .enumerate()
        .map(|(id, eye)| {
            let la = look_at(eye, &Point3::origin(), &Vector3::y())?;
            Ok(View {
                id: id as u32,
                pose: la.pose,
            })
        })
        .collect::<Result<Vec<_>, ViewError>>()?;
    Ok(ViewRig {
        views,
        intrinsics,
        n_slices,
        distance,
    })
}

impl ViewRig {
    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    /// Manifest records for this rig with images named `<id>.png`.
    pub fn manifest(&self) -> Vec<ManifestRecord> {
        self.views
            .iter()
            .map(|v| ManifestRecord::new(v, &self.intrinsics, format!("{}.png", v.id)))
            .collect()
    }
}

/// One line of the view manifest (JSON Lines). Field order is part of the
/// format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub view_id: u32,
    pub eye: [f64; 3],
    /// Row-major world-to-camera rotation.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub intrinsics: ManifestIntrinsics,
    pub image: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestIntrinsics {
    pub width: u32,
    pub height: u32,
    pub fov: f64,
}

impl ManifestRecord {
    pub fn new(view: &View, intr: &Intrinsics, image: String) -> Self {
        let r = view.pose.rotation;
        let eye = view.pose.eye();
        Self {
            view_id: view.id,
            eye: [eye.x, eye.y, eye.z],
            rotation: [
                r[(0, 0)], r[(0, 1)], r[(0, 2)],
                r[(1, 0)], r[(1, 1)], r[(1, 2)],
                r[(2, 0)], r[(2, 1)], r[(2, 2)],
            ],
            translation: view.pose.translation.into(),
            intrinsics: ManifestIntrinsics {
                width: intr.width(),
                height: intr.height(),
                fov: intr.fov_y(),
            },
            image,
        }
    }

    pub fn view(&self) -> View {
        View {
            id: self.view_id,
            pose: CameraPose {
                rotation: Matrix3::from_row_slice(&self.rotation),
                translation: Vector3::from(self.translation),
            },
        }
    }

    pub fn intrinsics(&self) -> Result<Intrinsics, ViewError> {
        Intrinsics::new(
            self.intrinsics.width,
            self.intrinsics.height,
            self.intrinsics.fov,
        )
    }
}

pub fn write_manifest(records: &[ManifestRecord], mut out: impl Write) -> Result<(), ViewError> {
    for r in records {
        let line = serde_json::to_string(r).map_err(io::Error::other)?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_manifest(reader: impl BufRead) -> Result<Vec<ManifestRecord>, ViewError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| ViewError::Manifest {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>, ViewError> {
    read_manifest(io::BufReader::new(fs::File::open(path)?))
}

/// Rebuild a rig from manifest records. All records must share intrinsics.
pub fn rig_from_manifest(records: &[ManifestRecord]) -> Result<ViewRig, ViewError> {
    let first = records.first().ok_or(ViewError::Manifest {
        line: 0,
        message: "empty manifest".into(),
    })?;
    let intrinsics = first.intrinsics()?;
    let mut views = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if r.intrinsics != first.intrinsics {
            return Err(ViewError::Manifest {
                line: i + 1,
                message: "intrinsics differ between views".into(),
            });
        }
        views.push(r.view());
    }
    let distance = views
        .first()
        .map(|v| v.pose.eye().coords.norm())
        .unwrap_or(DEFAULT_DISTANCE);
    let n_slices = infer_slices(views.len());
    Ok(ViewRig {
        views,
        intrinsics,
        n_slices,
        distance,
    })
}

fn infer_slices(count: usize) -> u32 {
    (0..64u32).find(|&n| view_count(n) == count).unwrap_or(0)
}
