//! Graph geodesics: Dijkstra over the vertex–edge graph with Euclidean edge
//! weights.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::{GeometryError, TriangleMesh};

/// Compressed adjacency of the mesh edge graph.
#[derive(Debug, Clone)]
pub struct EdgeGraph {
    offsets: Vec<usize>,
    adjacency: Vec<(usize, f64)>,
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then on vertex id
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl EdgeGraph {
    pub fn from_mesh(mesh: &TriangleMesh) -> Self {
        let n = mesh.vertex_count();
        let edges = mesh.edges();
        let mut degree = vec![0usize; n + 1];
        for &(a, b) in &edges {
            degree[a + 1] += 1;
            degree[b + 1] += 1;
        }
        let mut offsets = degree;
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut adjacency = vec![(0, 0.0); offsets[n]];
        let v = mesh.vertices();
        for &(a, b) in &edges {
            let w = (v[a] - v[b]).norm();
            adjacency[fill[a]] = (b, w);
            fill[a] += 1;
            adjacency[fill[b]] = (a, w);
            fill[b] += 1;
        }
        Self { offsets, adjacency }
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Single-source shortest paths. Vertices farther than `cutoff` (or
    /// unreachable) are left at `f64::INFINITY`.
    pub fn dijkstra(&self, source: usize, cutoff: Option<f64>) -> Vec<f64> {
        let limit = cutoff.unwrap_or(f64::INFINITY);
        let mut dist = vec![f64::INFINITY; self.vertex_count()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(HeapEntry {
            dist: 0.0,
            vertex: source,
        });
        while let Some(HeapEntry { dist: d, vertex }) = heap.pop() {
            if d > dist[vertex] {
                continue;
            }
            for &(next, w) in self.neighbors(vertex) {
                let nd = d + w;
                if nd < dist[next] && nd <= limit {
                    dist[next] = nd;
                    heap.push(HeapEntry {
                        dist: nd,
                        vertex: next,
                    });
                }
            }
        }
        dist
    }

    /// Closest vertex (by graph distance) satisfying `accept`, searching
    /// outward from `source`. Ties go to the lower vertex id.
    pub fn nearest_matching(
        &self,
        source: usize,
        accept: impl Fn(usize) -> bool,
    ) -> Option<(usize, f64)> {
        let mut dist = vec![f64::INFINITY; self.vertex_count()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(HeapEntry {
            dist: 0.0,
            vertex: source,
        });
        while let Some(HeapEntry { dist: d, vertex }) = heap.pop() {
            if d > dist[vertex] {
                continue;
            }
            if accept(vertex) {
                return Some((vertex, d));
            }
            for &(next, w) in self.neighbors(vertex) {
                let nd = d + w;
                if nd < dist[next] {
                    dist[next] = nd;
                    heap.push(HeapEntry {
                        dist: nd,
                        vertex: next,
                    });
                }
            }
        }
        None
    }
}

/// Dense distances between two vertex lists.
///
/// Rows follow `sources`, columns follow `targets`. Unreachable pairs are
/// filled with the largest finite distance in the matrix and recorded in
/// [`GeodesicMatrix::disconnected`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicMatrix {
    sources: Vec<usize>,
    targets: Vec<usize>,
    values: Vec<f64>,
    normalized: bool,
    disconnected: Vec<(usize, usize)>,
}

impl GeodesicMatrix {
    /// Square matrix from explicit distances (row-major, `ids.len()²` values).
    pub fn from_dense(ids: Vec<usize>, values: Vec<f64>) -> Result<Self, GeometryError> {
        let m = ids.len();
        if values.len() != m * m {
            return Err(GeometryError::ShapeMismatch {
                expected: m * m,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(GeometryError::InvalidDistance);
        }
        Ok(Self {
            sources: ids.clone(),
            targets: ids,
            values,
            normalized: false,
            disconnected: Vec::new(),
        })
    }

    pub fn rows(&self) -> usize {
        self.sources.len()
    }

    pub fn cols(&self) -> usize {
        self.targets.len()
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn is_square(&self) -> bool {
        self.sources == self.targets
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Pairs `(row, col)` that were unreachable and filled.
    pub fn disconnected(&self) -> &[(usize, usize)] {
        &self.disconnected
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.targets.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.targets.len();
        &self.values[row * c..(row + 1) * c]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Sub-matrix by row/column positions (not vertex ids).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let values = rows
            .iter()
            .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
            .map(|(r, c)| self.get(r, c))
            .collect();
        Self {
            sources: rows.iter().map(|&r| self.sources[r]).collect(),
            targets: cols.iter().map(|&c| self.targets[c]).collect(),
            values,
            normalized: self.normalized,
            disconnected: Vec::new(),
        }
    }

    /// Divide every entry by `scale` and mark the matrix normalized.
    pub fn divided_by(&self, scale: f64) -> Result<Self, GeometryError> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(GeometryError::AllZeroDistances);
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v /= scale);
        out.normalized = true;
        Ok(out)
    }
}

/// Shortest-path distances from every source to every target.
///
/// Per-source runs execute in parallel; when `sources == targets` the result
/// is made exactly symmetric by keeping the smaller of the two directed runs.
pub fn geodesic_distances(
    mesh: &TriangleMesh,
    sources: &[usize],
    targets: &[usize],
) -> Result<GeodesicMatrix, GeometryError> {
    let graph = EdgeGraph::from_mesh(mesh);
    geodesic_distances_on(&graph, sources, targets)
}

pub fn geodesic_distances_on(
    graph: &EdgeGraph,
    sources: &[usize],
    targets: &[usize],
) -> Result<GeodesicMatrix, GeometryError> {
    let n = graph.vertex_count();
    if let Some(&bad) = sources.iter().chain(targets).find(|&&v| v >= n) {
        return Err(GeometryError::VertexOutOfRange(bad));
    }
    let rows: Vec<Vec<f64>> = sources
        .par_iter()
        .map(|&s| {
            let d = graph.dijkstra(s, None);
            targets.iter().map(|&t| d[t]).collect()
        })
        .collect();
    let mut values: Vec<f64> = rows.into_iter().flatten().collect();
    let cols = targets.len();
    if sources == targets {
        for i in 0..cols {
            for j in i + 1..cols {
                let m = values[i * cols + j].min(values[j * cols + i]);
                values[i * cols + j] = m;
                values[j * cols + i] = m;
            }
        }
    }
    let max_finite = values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let mut disconnected = Vec::new();
    for (idx, v) in values.iter_mut().enumerate() {
        if !v.is_finite() {
            *v = max_finite;
            disconnected.push((idx / cols, idx % cols));
        }
    }
    if !disconnected.is_empty() {
        log::warn!(
            "{} unreachable vertex pairs filled with {max_finite}",
            disconnected.len()
        );
    }
    Ok(GeodesicMatrix {
        sources: sources.to_vec(),
        targets: targets.to_vec(),
        values,
        normalized: false,
        disconnected,
    })
}

/// Divide by the maximal entry so every distance lands in `[0, 1]`.
pub fn normalize_distances(g: &GeodesicMatrix) -> Result<GeodesicMatrix, GeometryError> {
    g.divided_by(g.max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;
    use approx::assert_relative_eq;
    use nalgebra::Point3;

    #[test]
    fn single_edge_and_chain() {
        // Strip of two triangles: 0-1-2 along x, plus apex vertex 3 far above.
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.3, 0.0, 0.0),
            Point3::new(0.6, 0.0, 0.0),
            Point3::new(0.3, 10.0, 0.0),
        ];
        let mesh = TriangleMesh::new(v, vec![[0, 1, 3], [1, 2, 3]]).unwrap();
        let g = geodesic_distances(&mesh, &[0, 1, 2], &[0, 1, 2]).unwrap();
        assert_relative_eq!(g.get(0, 1), 0.3, epsilon = 1e-15);
        assert_relative_eq!(g.get(0, 2), 0.6, epsilon = 1e-15);
        assert_eq!(g.get(1, 1), 0.0);
    }

    #[test]
    fn normalization() {
        let g = GeodesicMatrix::from_dense(vec![0, 1], vec![0.0, 2.0, 2.0, 0.0]).unwrap();
        let sub = GeodesicMatrix::from_dense(vec![0, 1], vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        assert_eq!(sub.divided_by(g.max()).unwrap().get(0, 1), 0.25);
        let n = normalize_distances(&g).unwrap();
        assert!(n.is_normalized());
        assert_eq!(n.max(), 1.0);
        assert_eq!(normalize_distances(&n).unwrap().values(), n.values());
        let zero = GeodesicMatrix::from_dense(vec![0, 1], vec![0.0; 4]).unwrap();
        assert!(matches!(normalize_distances(&zero), Err(GeometryError::AllZeroDistances)));
    }

    #[test]
    fn disconnected_pairs_are_filled_and_reported() {
        let a = primitives::tetrahedron();
        let b = a.map_vertices(|p| Point3::new(p.x + 10.0, p.y, p.z));
        let mut verts = a.vertices().to_vec();
        verts.extend_from_slice(b.vertices());
        let mut faces = a.faces().to_vec();
        faces.extend(b.faces().iter().map(|f| f.map(|i| i + 4)));
        let mesh = TriangleMesh::new(verts, faces).unwrap();
        let ids: Vec<usize> = (0..8).collect();
        let g = geodesic_distances(&mesh, &ids, &ids).unwrap();
        assert_eq!(g.disconnected().len(), 32);
        let max = g.max();
        assert!(max.is_finite());
        assert_eq!(g.get(0, 5), max);
        assert!(g.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn nearest_matching_finds_closest() {
        let mesh = primitives::icosphere(1, 1.0);
        let graph = EdgeGraph::from_mesh(&mesh);
        let d = graph.dijkstra(0, None);
        let (v, dist) = graph.nearest_matching(0, |v| v == 17).unwrap();
        assert_eq!(v, 17);
        assert_relative_eq!(dist, d[17], epsilon = 1e-12);
        assert_eq!(graph.nearest_matching(3, |_| true), Some((3, 0.0)));
    }

    #[test]
    fn cutoff_truncates() {
        let mesh = primitives::icosphere(2, 1.0);
        let graph = EdgeGraph::from_mesh(&mesh);
        let full = graph.dijkstra(5, None);
        let cut = graph.dijkstra(5, Some(0.5));
        for (f, c) in full.iter().zip(&cut) {
            if *f <= 0.5 {
                assert_eq!(f, c);
            } else {
                assert!(c.is_infinite());
            }
        }
    }
}
