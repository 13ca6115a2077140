//! Software z-buffer rasterization, point visibility and shaded renders.

use std::path::Path;

use image::GrayImage;
use nalgebra::{Point3, Vector2, Vector3};
use rayon::prelude::*;

use crate::geometry::TriangleMesh;
use crate::views::{project, CameraPose, Intrinsics, View, ViewRig};

/// Triangles are clipped against this minimum depth.
const NEAR: f64 = 1e-6;
/// Depths closer than this are treated as equal; the lower face id wins.
const DEPTH_TIE: f64 = 1e-12;

/// Per-pixel nearest depth and face id for one view. Pixel `(x, y)` is
/// stored at `y * width + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBuffers {
    pub view_id: u32,
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f64>,
    pub face: Vec<i64>,
}

impl FrameBuffers {
    fn empty(view_id: u32, intr: &Intrinsics) -> Self {
        let n = intr.width() as usize * intr.height() as usize;
        Self {
            view_id,
            width: intr.width(),
            height: intr.height(),
            depth: vec![f64::INFINITY; n],
            face: vec![-1; n],
        }
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    /// Face id at a pixel, or `None` for background.
    pub fn face_at(&self, x: u32, y: u32) -> Option<usize> {
        let f = self.face[self.index(x, y)];
        (f >= 0).then_some(f as usize)
    }

    pub fn depth_at(&self, x: u32, y: u32) -> f64 {
        self.depth[self.index(x, y)]
    }

    pub fn covered_pixels(&self) -> usize {
        self.face.iter().filter(|&&f| f >= 0).count()
    }
}

#[derive(Clone, Copy)]
struct ScreenVertex {
    pos: Vector2<f64>,
    inv_depth: f64,
}

#[inline]
fn edge(a: &Vector2<f64>, b: &Vector2<f64>, p: &Vector2<f64>) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Top-left rule for an edge of a triangle with positive [`edge`] area in
/// y-down screen space.
#[inline]
fn is_top_left(a: &Vector2<f64>, b: &Vector2<f64>) -> bool {
    let d = b - a;
    (d.y == 0.0 && d.x > 0.0) || d.y < 0.0
}

/// Clip a camera-space triangle against `depth >= NEAR`.
fn clip_near(tri: [Vector3<f64>; 3]) -> Vec<Vector3<f64>> {
    let depth = |v: &Vector3<f64>| -v.z;
    if tri.iter().all(|v| depth(v) >= NEAR) {
        return tri.to_vec();
    }
    let mut out = Vec::with_capacity(4);
    for k in 0..3 {
        let a = tri[k];
        let b = tri[(k + 1) % 3];
        let (da, db) = (depth(&a), depth(&b));
        if da >= NEAR {
            out.push(a);
        }
        if (da >= NEAR) != (db >= NEAR) {
            let t = (NEAR - da) / (db - da);
            out.push(a + (b - a) * t);
        }
    }
    out
}

/// Rasterize every face of `mesh` as seen from `pose`. No backface culling.
pub fn rasterize(mesh: &TriangleMesh, pose: &CameraPose, intr: &Intrinsics, view_id: u32) -> FrameBuffers {
    let mut fb = FrameBuffers::empty(view_id, intr);
    let f = intr.focal();
    let (cx, cy) = intr.principal_point();
    let to_screen = |c: &Vector3<f64>| {
        let d = -c.z;
        ScreenVertex {
            pos: Vector2::new(cx + f * c.x / d, cy - f * c.y / d),
            inv_depth: 1.0 / d,
        }
    };
    let verts = mesh.vertices();
    for (fid, face) in mesh.faces().iter().enumerate() {
        let cam = face.map(|i| pose.to_camera(&verts[i]));
        let poly = clip_near(cam);
        if poly.len() < 3 {
            continue;
        }
        let screen: Vec<ScreenVertex> = poly.iter().map(to_screen).collect();
        for k in 1..screen.len() - 1 {
            draw_triangle(&mut fb, [screen[0], screen[k], screen[k + 1]], fid as i64);
        }
    }
    fb
}

fn draw_triangle(fb: &mut FrameBuffers, mut tri: [ScreenVertex; 3], fid: i64) {
    let mut area = edge(&tri[0].pos, &tri[1].pos, &tri[2].pos);
    if area == 0.0 || !area.is_finite() {
        return;
    }
    if area < 0.0 {
        tri.swap(1, 2);
        area = -area;
    }
    let (w, h) = (fb.width as f64, fb.height as f64);
    let min_x = tri.iter().map(|v| v.pos.x).fold(f64::INFINITY, f64::min);
    let max_x = tri.iter().map(|v| v.pos.x).fold(f64::NEG_INFINITY, f64::max);
    let min_y = tri.iter().map(|v| v.pos.y).fold(f64::INFINITY, f64::min);
    let max_y = tri.iter().map(|v| v.pos.y).fold(f64::NEG_INFINITY, f64::max);
    if max_x < 0.0 || max_y < 0.0 || min_x > w || min_y > h {
        return;
    }
    let x0 = (min_x - 0.5).ceil().max(0.0) as u32;
    let x1 = (max_x - 0.5).floor().min(w - 1.0);
    let y0 = (min_y - 0.5).ceil().max(0.0) as u32;
    let y1 = (max_y - 0.5).floor().min(h - 1.0);
    if x1 < 0.0 || y1 < 0.0 {
        return;
    }
    let (x1, y1) = (x1 as u32, y1 as u32);
    let [a, b, c] = tri;
    let tl = [
        is_top_left(&b.pos, &c.pos),
        is_top_left(&c.pos, &a.pos),
        is_top_left(&a.pos, &b.pos),
    ];
    for py in y0..=y1 {
        for px in x0..=x1 {
            let p = Vector2::new(px as f64 + 0.5, py as f64 + 0.5);
            let w = [
                edge(&b.pos, &c.pos, &p),
                edge(&c.pos, &a.pos, &p),
                edge(&a.pos, &b.pos, &p),
            ];
            let inside = w
                .iter()
                .zip(tl)
                .all(|(&wk, top_left)| wk > 0.0 || (wk == 0.0 && top_left));
            if !inside {
                continue;
            }
            let inv = (w[0] * a.inv_depth + w[1] * b.inv_depth + w[2] * c.inv_depth) / area;
            let depth = 1.0 / inv;
            let idx = fb.index(px, py);
            let cur = fb.depth[idx];
            let closer = depth < cur - DEPTH_TIE
                || ((depth - cur).abs() < DEPTH_TIE && (fb.face[idx] < 0 || fid < fb.face[idx]));
            if closer {
                fb.depth[idx] = depth;
                fb.face[idx] = fid;
            }
        }
    }
}

/// Rasterize every view of a rig in parallel, in rig order.
pub fn rasterize_rig(mesh: &TriangleMesh, rig: &ViewRig) -> Vec<FrameBuffers> {
    rig.views
        .par_iter()
        .map(|v| rasterize(mesh, &v.pose, &rig.intrinsics, v.id))
        .collect()
}

/// A point on the surface tagged with the mesh vertex it sits on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub position: Point3<f64>,
    pub vertex: usize,
}

pub fn vertex_points(mesh: &TriangleMesh) -> Vec<SurfacePoint> {
    mesh.vertices()
        .iter()
        .enumerate()
        .map(|(vertex, &position)| SurfacePoint { position, vertex })
        .collect()
}

/// Depth-test slack: a point passes if
/// `depth <= buffer_depth * (1 + relative) + absolute`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityTolerance {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for VisibilityTolerance {
    fn default() -> Self {
        Self {
            relative: 1e-3,
            absolute: 1e-3,
        }
    }
}

/// Visibility of each point in one view.
///
/// A point is visible when it projects in front of the camera into the image
/// and either the pixel shows a face incident to the point's vertex or the
/// point passes the depth test.
pub fn point_visibility(
    points: &[SurfacePoint],
    vertex_faces: &[Vec<usize>],
    buffers: &FrameBuffers,
    pose: &CameraPose,
    intr: &Intrinsics,
    tol: VisibilityTolerance,
) -> Vec<bool> {
    points
        .iter()
        .map(|p| {
            let Some(proj) = project(&p.position, pose, intr) else {
                return false;
            };
            if !intr.contains(proj.x, proj.y) {
                return false;
            }
            let (x, y) = (proj.x.floor() as u32, proj.y.floor() as u32);
            if let Some(face) = buffers.face_at(x, y) {
                if vertex_faces[p.vertex].binary_search(&face).is_ok() {
                    return true;
                }
            }
            proj.depth <= buffers.depth_at(x, y) * (1.0 + tol.relative) + tol.absolute
        })
        .collect()
}

/// Point × view visibility. Views are indexed by their position in the rig.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityMask {
    point_count: usize,
    view_ids: Vec<u32>,
    visible: Vec<bool>,
    counts: Vec<u32>,
}

impl VisibilityMask {
    /// Assemble from per-view columns (each `point_count` long).
    pub fn from_columns(view_ids: Vec<u32>, columns: Vec<Vec<bool>>) -> Self {
        assert_eq!(view_ids.len(), columns.len());
        let point_count = columns.first().map_or(0, Vec::len);
        let views = view_ids.len();
        let mut visible = vec![false; point_count * views];
        for (v, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), point_count);
            for (p, &vis) in col.iter().enumerate() {
                visible[p * views + v] = vis;
            }
        }
        let counts = visible
            .chunks(views.max(1))
            .map(|row| row.iter().filter(|&&b| b).count() as u32)
            .collect();
        Self {
            point_count,
            view_ids,
            visible,
            counts,
        }
    }

    pub fn point_count(&self) -> usize {
        self.point_count
    }

    pub fn view_ids(&self) -> &[u32] {
        &self.view_ids
    }

    pub fn is_visible(&self, point: usize, view_index: usize) -> bool {
        self.visible[point * self.view_ids.len() + view_index]
    }

    /// Number of views seeing each point.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn never_visible(&self) -> Vec<usize> {
        (0..self.point_count).filter(|&p| self.counts[p] == 0).collect()
    }
}

/// Visibility of every vertex of `mesh` in every view of `rig`, given the
/// rig's buffers in rig order.
pub fn vertex_visibility(
    mesh: &TriangleMesh,
    rig: &ViewRig,
    buffers: &[FrameBuffers],
    tol: VisibilityTolerance,
) -> VisibilityMask {
    let points = vertex_points(mesh);
    let incidence = mesh.vertex_faces();
    let columns = rig
        .views
        .par_iter()
        .zip(buffers)
        .map(|(v, fb)| point_visibility(&points, &incidence, fb, &v.pose, &rig.intrinsics, tol))
        .collect();
    VisibilityMask::from_columns(rig.views.iter().map(|v| v.id).collect(), columns)
}

/// Constant surface reflectance for shaded renders.
pub const ALBEDO: f64 = 0.7;
pub const BACKGROUND: f64 = 1.0;

/// Grayscale intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadedImage {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f64>,
}

impl ShadedImage {
    pub fn at(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    pub fn to_gray8(&self) -> GrayImage {
        let bytes = self
            .values
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        GrayImage::from_raw(self.width, self.height, bytes).expect("buffer matches dimensions")
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> image::ImageResult<()> {
        self.to_gray8().save_with_format(path, image::ImageFormat::Png)
    }
}

/// Lambertian render lit by a point light at the eye. Normals are the
/// interpolated area-weighted vertex normals, shaded two-sided.
pub fn render_shaded(mesh: &TriangleMesh, pose: &CameraPose, intr: &Intrinsics) -> ShadedImage {
    let fb = rasterize(mesh, pose, intr, 0);
    shade(mesh, &mesh.vertex_normals(), &fb, pose, intr)
}

pub fn render_view(mesh: &TriangleMesh, view: &View, intr: &Intrinsics) -> ShadedImage {
    render_shaded(mesh, &view.pose, intr)
}

fn shade(
    mesh: &TriangleMesh,
    vertex_normals: &[Vector3<f64>],
    fb: &FrameBuffers,
    pose: &CameraPose,
    intr: &Intrinsics,
) -> ShadedImage {
    let eye = pose.eye();
    let mut values = vec![BACKGROUND; fb.depth.len()];
    for y in 0..fb.height {
        for x in 0..fb.width {
            let Some(face) = fb.face_at(x, y) else {
                continue;
            };
            let p = surface_point(fb, pose, intr, x, y);
            let tri = mesh.faces()[face];
            let bary = barycentric(&tri.map(|i| mesh.vertices()[i]), &p);
            let mut n = tri
                .iter()
                .zip(bary)
                .map(|(&i, b)| vertex_normals[i] * b)
                .sum::<Vector3<f64>>();
            if n.norm() < 1e-12 {
                n = mesh.face_normals()[face];
            } else {
                n.normalize_mut();
            }
            let l = (eye - p).normalize();
            values[fb.index(x, y)] = ALBEDO * n.dot(&l).abs();
        }
    }
    ShadedImage {
        width: fb.width,
        height: fb.height,
        values,
    }
}

/// World position of the surface seen at the center of pixel `(x, y)`.
pub fn surface_point(fb: &FrameBuffers, pose: &CameraPose, intr: &Intrinsics, x: u32, y: u32) -> Point3<f64> {
    pose.eye() + pose.ray(intr, x as f64 + 0.5, y as f64 + 0.5) * fb.depth_at(x, y)
}

/// Intersection of the ray through image point `(x, y)` with the plane of
/// `face`, as a depth along the view axis.
pub fn ray_face_depth(mesh: &TriangleMesh, face: usize, pose: &CameraPose, intr: &Intrinsics, x: f64, y: f64) -> Option<f64> {
    let n = mesh.face_normals()[face];
    let a = mesh.vertices()[mesh.faces()[face][0]];
    let dir = pose.ray(intr, x, y);
    let denom = n.dot(&dir);
    if denom.abs() < 1e-15 {
        return None;
    }
    Some(n.dot(&(a - pose.eye())) / denom)
}

fn barycentric(tri: &[Point3<f64>; 3], p: &Point3<f64>) -> [f64; 3] {
    let [a, b, c] = tri;
    let n = (b - a).cross(&(c - a));
    let denom = n.norm_squared();
    if denom == 0.0 {
        return [1.0 / 3.0; 3];
    }
    let wa = (c - b).cross(&(p - b)).dot(&n) / denom;
    let wb = (a - c).cross(&(p - c)).dot(&n) / denom;
    [wa, wb, 1.0 - wa - wb]
}
