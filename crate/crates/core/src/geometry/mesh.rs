//! Indexed triangle mesh and bounding-box normalization.

use nalgebra::{Matrix3, Point3, Vector3};

use super::GeometryError;

/// Faces whose area falls below this fraction of the squared bounding-box
/// diagonal are treated as degenerate.
pub const DEGENERATE_AREA_RATIO: f64 = 1e-12;

/// An indexed triangle mesh.
///
/// Invariants: at least 4 vertices and 1 face, every face index is in range,
/// and no face repeats a vertex. Face normals are derived at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    face_normals: Vec<Vector3<f64>>,
}

impl TriangleMesh {
    /// Build a mesh, validating index invariants. Degenerate (zero-area)
    /// faces are kept; use [`TriangleMesh::from_raw`] to drop them.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        if vertices.len() < 4 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if faces.is_empty() {
            return Err(GeometryError::NoValidFaces);
        }
        if let Some(i) = vertices.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::NonFiniteVertex(i));
        }
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&v| v >= vertices.len()) {
                return Err(GeometryError::IndexOutOfRange {
                    face: fi,
                    index: bad,
                    vertex_count: vertices.len(),
                });
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(GeometryError::RepeatedIndex(fi));
            }
        }
        let face_normals = faces.iter().map(|f| triangle_normal(&vertices, f)).collect();
        Ok(Self {
            vertices,
            faces,
            face_normals,
        })
    }

    /// Build a mesh from unvalidated faces, dropping faces with repeated
    /// indices or area below [`DEGENERATE_AREA_RATIO`] × bbox-diagonal².
    /// Returns the mesh and the number of dropped faces.
    pub fn from_raw(
        vertices: Vec<Point3<f64>>,
        faces: Vec<[usize; 3]>,
    ) -> Result<(Self, usize), GeometryError> {
        if let Some(i) = vertices.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::NonFiniteVertex(i));
        }
        let diag2 = match bounding_box(&vertices) {
            Some((lo, hi)) => (hi - lo).norm_squared(),
            None => 0.0,
        };
        let min_area = DEGENERATE_AREA_RATIO * diag2;
        let total = faces.len();
        let mut kept = Vec::with_capacity(total);
        for (fi, f) in faces.into_iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&v| v >= vertices.len()) {
                return Err(GeometryError::IndexOutOfRange {
                    face: fi,
                    index: bad,
                    vertex_count: vertices.len(),
                });
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                continue;
            }
            if triangle_area(&vertices, &f) <= min_area {
                continue;
            }
            kept.push(f);
        }
        let dropped = total - kept.len();
        Ok((Self::new(vertices, kept)?, dropped))
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Unit face normals following the face winding (zero for degenerate faces).
    pub fn face_normals(&self) -> &[Vector3<f64>] {
        &self.face_normals
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn face_area(&self, face: usize) -> f64 {
        triangle_area(&self.vertices, &self.faces[face])
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point3<f64>, Point3<f64>) {
        bounding_box(&self.vertices).expect("mesh has vertices")
    }

    /// Area-weighted vertex normals. Vertices with no incident area get zero.
    pub fn vertex_normals(&self) -> Vec<Vector3<f64>> {
        let mut acc = vec![Vector3::zeros(); self.vertices.len()];
        for f in &self.faces {
            let [a, b, c] = f.map(|i| self.vertices[i]);
            // Unnormalized cross product is twice the area times the normal.
            let n = (b - a).cross(&(c - a));
            for &v in f {
                acc[v] += n;
            }
        }
        acc.into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    n
                }
            })
            .collect()
    }

    /// For every vertex, the ids of faces that reference it (ascending).
    pub fn vertex_faces(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                inc[v].push(fi);
            }
        }
        inc
    }

    /// Unique undirected edges `(lo, hi)` in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])])
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Nearest vertex to `p` in Euclidean distance; ties go to the lowest index.
    pub fn nearest_vertex(&self, p: &Point3<f64>) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, v) in self.vertices.iter().enumerate() {
            let d = (v - p).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        (best.0, best.1.sqrt())
    }

    /// Apply a point map to every vertex, keeping connectivity.
    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        let vertices: Vec<_> = self.vertices.iter().map(f).collect();
        let face_normals = self.faces.iter().map(|fc| triangle_normal(&vertices, fc)).collect();
        Self {
            vertices,
            faces: self.faces.clone(),
            face_normals,
        }
    }

    /// Rigid motion `p -> rotation * p + translation`.
    pub fn transformed(&self, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Self {
        self.map_vertices(|p| Point3::from(rotation * p.coords + translation))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map_vertices(|p| Point3::from(p.coords * factor))
    }

    /// Translate the bbox center to the origin and scale uniformly so the
    /// longest bbox edge has length 1.
    pub fn normalize(&self) -> Result<(Self, Normalization), GeometryError> {
        let (lo, hi) = self.bounding_box();
        let extent = hi - lo;
        let longest = extent.max();
        if !(longest > 0.0) {
            return Err(GeometryError::DegenerateBoundingBox);
        }
        let norm = Normalization {
            center: nalgebra::center(&lo, &hi).coords,
            scale: 1.0 / longest,
        };
        Ok((self.map_vertices(|p| norm.apply(p)), norm))
    }
}

/// Record of a [`TriangleMesh::normalize`] call: `normalized = (p - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub center: Vector3<f64>,
    pub scale: f64,
}

impl Normalization {
    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from((p.coords - self.center) * self.scale)
    }

    /// Map a normalized-frame point back to the original frame.
    pub fn invert(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(p.coords / self.scale + self.center)
    }

    /// Translation applied before scaling (the negated center).
    pub fn shift(&self) -> Vector3<f64> {
        -self.center
    }
}

pub(crate) fn bounding_box(points: &[Point3<f64>]) -> Option<(Point3<f64>, Point3<f64>)> {
    let first = points.first()?;
    let mut lo = *first;
    let mut hi = *first;
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    Some((lo, hi))
}

fn triangle_area(vertices: &[Point3<f64>], f: &[usize; 3]) -> f64 {
    let [a, b, c] = f.map(|i| vertices[i]);
    0.5 * (b - a).cross(&(c - a)).norm()
}

fn triangle_normal(vertices: &[Point3<f64>], f: &[usize; 3]) -> Vector3<f64> {
    let [a, b, c] = f.map(|i| vertices[i]);
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if len > 0.0 {
        n / len
    } else {
        Vector3::zeros()
    }
}
