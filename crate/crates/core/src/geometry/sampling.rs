//! Greedy farthest-point sampling over an arbitrary point metric.

use rayon::prelude::*;

use super::geodesic::{EdgeGraph, GeodesicMatrix};
use super::{GeometryError, TriangleMesh};

/// Anything that can report distances from one point to all points.
pub trait DistanceSource: Sync {
    fn point_count(&self) -> usize;

    /// Distances from point `i` to every point, in point order. Must be
    /// finite.
    fn distances_from(&self, i: usize) -> Vec<f64>;

    /// Mean distance of every point to all points.
    fn mean_distances(&self) -> Vec<f64> {
        let n = self.point_count();
        (0..n)
            .into_par_iter()
            .map(|i| self.distances_from(i).iter().sum::<f64>() / n as f64)
            .collect()
    }
}

impl DistanceSource for GeodesicMatrix {
    fn point_count(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows()
    }

    fn distances_from(&self, i: usize) -> Vec<f64> {
        self.row(i).to_vec()
    }
}

/// Lazily evaluated graph geodesics between all vertices of a mesh.
///
/// Unreachable vertices report the largest finite distance of the run.
pub struct MeshGeodesics {
    graph: EdgeGraph,
}

impl MeshGeodesics {
    pub fn new(mesh: &TriangleMesh) -> Self {
        Self {
            graph: EdgeGraph::from_mesh(mesh),
        }
    }

    pub fn graph(&self) -> &EdgeGraph {
        &self.graph
    }
}

impl DistanceSource for MeshGeodesics {
    fn point_count(&self) -> usize {
        self.graph.vertex_count()
    }

    fn distances_from(&self, i: usize) -> Vec<f64> {
        let mut d = self.graph.dijkstra(i, None);
        let max = d.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
        d.iter_mut().filter(|v| !v.is_finite()).for_each(|v| *v = max);
        d
    }
}

/// How the first sample is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedRule {
    /// The point with the largest mean distance to all points.
    MaxMeanDistance,
    Fixed(usize),
}

/// Ordered FPS result.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoints {
    pub indices: Vec<usize>,
    pub seed_rule: SeedRule,
    /// Distance of each sample to the previously chosen set at the moment it
    /// was picked (`INFINITY` for the seed).
    pub coverage: Vec<f64>,
}

impl SamplePoints {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Relative gap below which two distances count as tied, so that rounding
/// noise (e.g. from rescaling a symmetric mesh) cannot reorder exact ties.
const TIE_REL: f64 = 1e-9;

/// Greedy farthest-point sampling. After the seed, each step picks the point
/// maximizing its distance to the chosen set; ties (within a relative
/// `1e-9`) go to the lowest index.
pub fn farthest_point_sample(
    metric: &impl DistanceSource,
    count: usize,
    seed_rule: SeedRule,
) -> Result<SamplePoints, GeometryError> {
    let n = metric.point_count();
    if count > n {
        return Err(GeometryError::TooManySamples {
            requested: count,
            available: n,
        });
    }
    if count == 0 {
        return Err(GeometryError::ZeroSamples);
    }
    let seed = match seed_rule {
        SeedRule::Fixed(i) if i >= n => return Err(GeometryError::VertexOutOfRange(i)),
        SeedRule::Fixed(i) => i,
        SeedRule::MaxMeanDistance => argmax_lowest(&metric.mean_distances()),
    };
    let mut chosen = vec![false; n];
    let mut indices = Vec::with_capacity(count);
    let mut coverage = Vec::with_capacity(count);
    let mut min_dist = vec![f64::INFINITY; n];
    let mut next = seed;
    let mut next_cov = f64::INFINITY;
    loop {
        chosen[next] = true;
        indices.push(next);
        coverage.push(next_cov);
        if indices.len() == count {
            break;
        }
        let d = metric.distances_from(next);
        for (m, &v) in min_dist.iter_mut().zip(&d) {
            *m = m.min(v);
        }
        let mut best = None;
        for i in 0..n {
            if chosen[i] {
                continue;
            }
            match best {
                Some((_, bd)) if min_dist[i] <= bd * (1.0 + TIE_REL) => {}
                _ => best = Some((i, min_dist[i])),
            }
        }
        let (i, cov) = best.expect("count <= n leaves a candidate");
        next = i;
        next_cov = cov;
    }
    Ok(SamplePoints {
        indices,
        seed_rule,
        coverage,
    })
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] * (1.0 + TIE_REL) {
            best = i;
        }
    }
    best
}
