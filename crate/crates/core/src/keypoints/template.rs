//! Few-shot templates and candidate sets.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Point3};

use super::KeypointError;
use crate::features::PointFeatureSet;
use crate::geometry::{
    farthest_point_sample, geodesic_distances, normalize_distances, GeodesicMatrix, MeshGeodesics, SeedRule,
    TriangleMesh,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotatedKeypoint {
    pub vertex: usize,
    /// Annotated position before snapping.
    pub position: Point3<f64>,
}

/// Labeled keypoints of one shape, keyed by semantic id.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedShape {
    pub id: String,
    pub keypoints: BTreeMap<u32, AnnotatedKeypoint>,
}

impl AnnotatedShape {
    /// Snap each `(semantic id, position)` to its nearest vertex. A repeated
    /// semantic id keeps its first occurrence.
    pub fn snapped(id: impl Into<String>, mesh: &TriangleMesh, points: impl IntoIterator<Item = (u32, Point3<f64>)>) -> Self {
        let id = id.into();
        let mut keypoints = BTreeMap::new();
        for (semantic, position) in points {
            if keypoints.contains_key(&semantic) {
                log::warn!("shape {id}: duplicate semantic id {semantic} ignored");
                continue;
            }
            let (vertex, _) = mesh.nearest_vertex(&position);
            keypoints.insert(semantic, AnnotatedKeypoint { vertex, position });
        }
        Self { id, keypoints }
    }

    pub fn vertices(&self) -> Vec<usize> {
        self.keypoints.values().map(|k| k.vertex).collect()
    }
}

/// One few-shot example: its labels, per-vertex features and a normalized
/// distance matrix whose ids include every labeled vertex.
#[derive(Debug, Clone, Copy)]
pub struct TemplateShape<'a> {
    pub shape: &'a AnnotatedShape,
    pub features: &'a PointFeatureSet,
    pub geodesics: &'a GeodesicMatrix,
}

/// Averaged keypoint features (`k × d`) and relative distances (`k × k`).
#[derive(Debug, Clone, PartialEq)]
pub struct FewShotTemplate {
    pub semantic_ids: Vec<u32>,
    pub features: DMatrix<f64>,
    pub distances: DMatrix<f64>,
    /// Number of shapes contributing to each class.
    pub class_counts: Vec<usize>,
    /// Class pairs that never occur together; their distance is the mean of
    /// the defined off-diagonal entries.
    pub missing_pairs: Vec<(u32, u32)>,
}

impl FewShotTemplate {
    pub fn k(&self) -> usize {
        self.semantic_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

fn index_of(ids: &[usize], vertex: usize) -> Option<usize> {
    ids.iter().position(|&v| v == vertex)
}

/// Average features per class and relative distances per class pair over
/// the shapes that contain them. Classes are ordered by semantic id.
pub fn build_template(shapes: &[TemplateShape<'_>]) -> Result<FewShotTemplate, KeypointError> {
    let first = shapes.first().ok_or(KeypointError::NoShapes)?;
    let d = first.features.dim();
    let mut ids: Vec<u32> = Vec::new();
    for s in shapes {
        if s.shape.keypoints.is_empty() {
            return Err(KeypointError::EmptyShape(s.shape.id.clone()));
        }
        if s.features.dim() != d {
            return Err(KeypointError::DimensionMismatch {
                expected: d,
                found: s.features.dim(),
            });
        }
        ids.extend(s.shape.keypoints.keys());
    }
    ids.sort_unstable();
    ids.dedup();
    let k = ids.len();
    let slot = |sem: u32| ids.binary_search(&sem).expect("collected above");
    let mut fsum = DMatrix::<f64>::zeros(k, d);
    let mut counts = vec![0usize; k];
    let mut dsum = DMatrix::<f64>::zeros(k, k);
    let mut pair_counts = DMatrix::<usize>::zeros(k, k);
    for s in shapes {
        let uncovered = |vertex| KeypointError::VertexNotCovered {
            shape: s.shape.id.clone(),
            vertex,
        };
        let mut rows = Vec::with_capacity(s.shape.keypoints.len());
        for (&sem, kp) in &s.shape.keypoints {
            if kp.vertex >= s.features.len() {
                return Err(uncovered(kp.vertex));
            }
            let src = index_of(s.geodesics.sources(), kp.vertex).ok_or_else(|| uncovered(kp.vertex))?;
            let dst = index_of(s.geodesics.targets(), kp.vertex).ok_or_else(|| uncovered(kp.vertex))?;
            let c = slot(sem);
            for (j, &v) in s.features.row(kp.vertex).iter().enumerate() {
                fsum[(c, j)] += v;
            }
            counts[c] += 1;
            rows.push((c, src, dst));
        }
        for &(a, src, _) in &rows {
            for &(b, _, dst) in &rows {
                if a != b {
                    dsum[(a, b)] += s.geodesics.get(src, dst);
                    pair_counts[(a, b)] += 1;
                }
            }
        }
    }
    let features = DMatrix::from_fn(k, d, |r, c| fsum[(r, c)] / counts[r] as f64);
    let mut distances = DMatrix::<f64>::zeros(k, k);
    let mut defined = Vec::new();
    let mut missing_pairs = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            if pair_counts[(a, b)] > 0 {
                // Average both directions so the template is exactly symmetric.
                let ab = dsum[(a, b)] / pair_counts[(a, b)] as f64;
                let ba = dsum[(b, a)] / pair_counts[(b, a)] as f64;
                distances[(a, b)] = 0.5 * (ab + ba);
                defined.push(distances[(a, b)]);
            } else if a < b {
                missing_pairs.push((ids[a], ids[b]));
            }
        }
    }
    if !missing_pairs.is_empty() {
        let fill = if defined.is_empty() {
            0.0
        } else {
            defined.iter().sum::<f64>() / defined.len() as f64
        };
        for &(x, y) in &missing_pairs {
            let (a, b) = (slot(x), slot(y));
            distances[(a, b)] = fill;
            distances[(b, a)] = fill;
        }
        log::warn!("{} keypoint pairs never co-occur; filled with {fill:.4}", missing_pairs.len());
    }
    Ok(FewShotTemplate {
        semantic_ids: ids,
        features,
        distances,
        class_counts: counts,
        missing_pairs,
    })
}

/// Normalized graph distances among a shape's labeled vertices plus
/// `extra_samples` farthest-point samples; the samples make the maximum a
/// good estimate of the shape's largest geodesic distance.
pub fn keypoint_geodesics(
    mesh: &TriangleMesh,
    shape: &AnnotatedShape,
    extra_samples: usize,
) -> Result<GeodesicMatrix, KeypointError> {
    let mut ids = shape.vertices();
    let extra = extra_samples.min(mesh.vertex_count());
    if extra > 0 {
        let fps = farthest_point_sample(&MeshGeodesics::new(mesh), extra, SeedRule::Fixed(0))?;
        for v in fps.indices {
            if !ids.contains(&v) {
                ids.push(v);
            }
        }
    }
    let g = geodesic_distances(mesh, &ids, &ids)?;
    Ok(normalize_distances(&g)?)
}

/// Candidate points with their features and relative distances (max 1).
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub vertices: Vec<usize>,
    pub positions: Vec<Point3<f64>>,
    pub features: DMatrix<f64>,
    pub distances: DMatrix<f64>,
}

impl CandidateSet {
    pub fn new(
        vertices: Vec<usize>,
        positions: Vec<Point3<f64>>,
        features: DMatrix<f64>,
        distances: DMatrix<f64>,
    ) -> Result<Self, KeypointError> {
        let n = vertices.len();
        if positions.len() != n || features.nrows() != n {
            return Err(KeypointError::DimensionMismatch {
                expected: n,
                found: features.nrows().min(positions.len()),
            });
        }
        if distances.nrows() != n || distances.ncols() != n {
            return Err(KeypointError::DistanceShape);
        }
        Ok(Self {
            vertices,
            positions,
            features,
            distances,
        })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

/// Farthest-point sample `n` vertices and gather their features and
/// normalized pairwise graph distances.
pub fn candidate_set(
    mesh: &TriangleMesh,
    features: &PointFeatureSet,
    n: usize,
    seed_rule: SeedRule,
) -> Result<CandidateSet, KeypointError> {
    let n = n.min(mesh.vertex_count());
    let fps = farthest_point_sample(&MeshGeodesics::new(mesh), n, seed_rule)?;
    let ids = fps.indices;
    let g = normalize_distances(&geodesic_distances(mesh, &ids, &ids)?)?;
    let feats = DMatrix::from_row_slice(ids.len(), features.dim(), &features.select(&ids));
    let dist = DMatrix::from_row_slice(ids.len(), ids.len(), g.values());
    let positions = ids.iter().map(|&v| mesh.vertices()[v]).collect();
    CandidateSet::new(ids, positions, feats, dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    fn shape(id: &str, kps: &[(u32, usize)]) -> AnnotatedShape {
        AnnotatedShape {
            id: id.into(),
            keypoints: kps
                .iter()
                .map(|&(s, v)| (s, AnnotatedKeypoint { vertex: v, position: Point3::origin() }))
                .collect(),
        }
    }

    fn chain_geodesics(n: usize) -> GeodesicMatrix {
        let vals = (0..n * n).map(|k| ((k / n) as f64 - (k % n) as f64).abs() / (n - 1) as f64).collect();
        GeodesicMatrix::from_dense((0..n).collect(), vals).unwrap()
    }

    fn feats(n: usize, offset: f64) -> PointFeatureSet {
        PointFeatureSet::from_rows(2, (0..n).flat_map(|i| [i as f64 + offset, 1.0]).collect())
    }

    #[test]
    fn single_shape_template_is_exact() {
        let s = shape("a", &[(3, 0), (1, 4), (2, 2)]);
        let (f, g) = (feats(5, 0.0), chain_geodesics(5));
        let t = build_template(&[TemplateShape { shape: &s, features: &f, geodesics: &g }]).unwrap();
        assert_eq!(t.semantic_ids, vec![1, 2, 3]);
        assert_eq!(t.features.row(0).iter().copied().collect::<Vec<_>>(), vec![4.0, 1.0]);
        assert_eq!(t.distances[(0, 2)], 1.0);
        assert_eq!(t.distances[(1, 2)], 0.5);
        assert!(t.missing_pairs.is_empty());
        let twice = build_template(&[
            TemplateShape { shape: &s, features: &f, geodesics: &g },
            TemplateShape { shape: &s, features: &f, geodesics: &g },
        ])
        .unwrap();
        assert_eq!(twice.features, t.features);
        assert_eq!(twice.distances, t.distances);
    }

    #[test]
    fn partial_classes_average_only_their_shapes() {
        let g = chain_geodesics(5);
        let (fa, fb, fc) = (feats(5, 0.0), feats(5, 10.0), feats(5, 100.0));
        let a = shape("a", &[(1, 0), (2, 1)]);
        let b = shape("b", &[(1, 2), (2, 3)]);
        let c = shape("c", &[(1, 4), (3, 0)]);
        let t = build_template(&[
            TemplateShape { shape: &a, features: &fa, geodesics: &g },
            TemplateShape { shape: &b, features: &fb, geodesics: &g },
            TemplateShape { shape: &c, features: &fc, geodesics: &g },
        ])
        .unwrap();
        // Class 2 is in shapes a and b only: vertex 1 (+0) and vertex 3 (+10).
        assert_eq!(t.features[(1, 0)], (1.0 + 13.0) / 2.0);
        assert_eq!(t.class_counts, vec![3, 2, 1]);
        // Classes 2 and 3 never meet.
        assert_eq!(t.missing_pairs, vec![(2, 3)]);
        let defined = [t.distances[(0, 1)], t.distances[(0, 2)]];
        assert_eq!(t.distances[(1, 2)], (defined[0] + defined[1]) / 2.0);
        assert_eq!(t.distances, t.distances.transpose());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(build_template(&[]), Err(KeypointError::NoShapes)));
        let g = chain_geodesics(3);
        let f = feats(3, 0.0);
        let s = shape("x", &[(1, 7)]);
        assert!(matches!(
            build_template(&[TemplateShape { shape: &s, features: &f, geodesics: &g }]),
            Err(KeypointError::VertexNotCovered { .. })
        ));
    }

    #[test]
    fn candidates_are_normalized() {
        let mesh = primitives::icosphere(2, 0.5);
        let f = PointFeatureSet::from_rows(1, (0..mesh.vertex_count()).map(|i| i as f64).collect());
        let c = candidate_set(&mesh, &f, 30, SeedRule::Fixed(0)).unwrap();
        assert_eq!(c.len(), 30);
        assert_eq!(c.distances.max(), 1.0);
        assert_eq!(c.distances, c.distances.transpose());
        assert_eq!(c.features[(3, 0)], c.vertices[3] as f64);
        let s = AnnotatedShape::snapped("s", &mesh, [(5, mesh.vertices()[17] * 1.001)]);
        let g = keypoint_geodesics(&mesh, &s, 16).unwrap();
        assert_eq!(g.sources()[0], 17);
        assert!(g.is_normalized());
    }
}
