//! Multi-view averaging and Gaussian surface smoothing.

use std::collections::HashMap;

use rayon::prelude::*;

use super::provider::{FeatureProvider, ViewContext};
use super::{pixel_to_patch, FeatureError, FeatureMap, PointFeatureSet};
use crate::geometry::{EdgeGraph, GeodesicMatrix, TriangleMesh};
use crate::raster::{rasterize_rig, vertex_points, vertex_visibility, SurfacePoint, VisibilityMask, VisibilityTolerance};
use crate::views::{project, ViewRig};

/// Average, for every point, the patch features at its projection over the
/// views in which it is visible. Sums run in ascending view-id order in f64.
/// Points seen by no view get zeros and a count of 0.
pub fn backproject(
    points: &[SurfacePoint],
    rig: &ViewRig,
    vis: &VisibilityMask,
    maps: &[FeatureMap],
    provider: &str,
) -> Result<PointFeatureSet, FeatureError> {
    let by_id: HashMap<u32, &FeatureMap> = maps.iter().map(|m| (m.view_id, m)).collect();
    let mut order: Vec<(usize, &FeatureMap)> = rig
        .views
        .iter()
        .enumerate()
        .map(|(pos, v)| by_id.get(&v.id).map(|&m| (pos, m)).ok_or(FeatureError::MissingView(v.id)))
        .collect::<Result<_, _>>()?;
    order.sort_by_key(|(pos, _)| rig.views[*pos].id);
    let dim = order.first().map_or(0, |(_, m)| m.dim());
    for (_, m) in &order {
        if m.dim() != dim {
            return Err(FeatureError::DimensionMismatch {
                view: m.view_id,
                expected: dim,
                found: m.dim(),
            });
        }
    }
    let intr = &rig.intrinsics;
    let rows: Vec<(Vec<f64>, u32)> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut sum = vec![0.0f64; dim];
            let mut count = 0u32;
            for &(pos, map) in &order {
                if !vis.is_visible(i, pos) {
                    continue;
                }
                let Some(proj) = project(&p.position, &rig.views[pos].pose, intr) else {
                    continue;
                };
                let (r, c) = pixel_to_patch(proj.x, proj.y, intr.width(), intr.height(), map.rows(), map.cols());
                for (s, &v) in sum.iter_mut().zip(map.patch(r, c)) {
                    *s += f64::from(v);
                }
                count += 1;
            }
            if count > 0 {
                sum.iter_mut().for_each(|s| *s /= count as f64);
            }
            (sum, count)
        })
        .collect();
    let mut values = Vec::with_capacity(points.len() * dim);
    let mut counts = Vec::with_capacity(points.len());
    for (row, c) in rows {
        values.extend(row);
        counts.push(c);
    }
    Ok(PointFeatureSet::new(dim, values, counts, provider))
}

fn check_sigma(sigma: f64) -> Result<(), FeatureError> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(FeatureError::InvalidSigma(sigma))
    }
}

#[inline]
fn weight(d: f64, sigma: f64) -> f64 {
    (-d * d / (2.0 * sigma * sigma)).exp()
}

fn smoothed(raw: &PointFeatureSet, rows: Vec<Vec<f64>>, sigma: f64) -> PointFeatureSet {
    let mut out = PointFeatureSet::new(raw.dim(), rows.concat(), raw.counts().to_vec(), raw.provider.clone());
    out.sigma = Some(sigma);
    out
}

fn weighted_mean(raw: &PointFeatureSet, terms: impl Iterator<Item = (usize, f64)>) -> Option<Vec<f64>> {
    let mut acc = vec![0.0; raw.dim()];
    let mut total = 0.0;
    for (j, w) in terms {
        if w == 0.0 {
            continue;
        }
        total += w;
        for (a, &v) in acc.iter_mut().zip(raw.row(j)) {
            *a += w * v;
        }
    }
    (total > 0.0).then(|| acc.into_iter().map(|a| a / total).collect())
}

/// Gaussian re-weighting over observed points with a dense distance matrix
/// whose rows and columns follow point order:
/// `f_i = Σ_j w(d_ij) f_j / Σ_j w(d_ij)` with `w(d) = exp(−d²/2σ²)`.
/// If every weight underflows, the nearest observed point's feature is used.
pub fn gaussian_reweight(raw: &PointFeatureSet, g: &GeodesicMatrix, sigma: f64) -> Result<PointFeatureSet, FeatureError> {
    check_sigma(sigma)?;
    let n = raw.len();
    if g.rows() != n || g.cols() != n {
        return Err(FeatureError::CoverageMismatch(n));
    }
    let observed: Vec<usize> = (0..n).filter(|&j| raw.is_observed(j)).collect();
    if observed.is_empty() {
        return Err(FeatureError::NoVisiblePoints);
    }
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let d = g.row(i);
            weighted_mean(raw, observed.iter().map(|&j| (j, weight(d[j], sigma)))).unwrap_or_else(|| {
                let nearest = observed
                    .iter()
                    .copied()
                    .min_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)))
                    .expect("observed is not empty");
                raw.row(nearest).to_vec()
            })
        })
        .collect();
    Ok(smoothed(raw, rows, sigma))
}

/// Distance beyond which the Gaussian weight is exactly zero in f64.
fn cutoff(sigma: f64) -> f64 {
    sigma * (2.0f64 * 746.0).sqrt()
}

/// Same as [`gaussian_reweight`] for one point per mesh vertex, using
/// truncated graph searches instead of a dense matrix. Vertices with no
/// observed vertex in their connected component fall back to the nearest
/// observed vertex in space.
pub fn gaussian_reweight_mesh(
    raw: &PointFeatureSet,
    mesh: &TriangleMesh,
    graph: &EdgeGraph,
    sigma: f64,
) -> Result<PointFeatureSet, FeatureError> {
    check_sigma(sigma)?;
    let n = raw.len();
    if graph.vertex_count() != n {
        return Err(FeatureError::CoverageMismatch(n));
    }
    if !(0..n).any(|j| raw.is_observed(j)) {
        return Err(FeatureError::NoVisiblePoints);
    }
    let limit = cutoff(sigma);
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let d = graph.dijkstra(i, Some(limit));
            let terms = d
                .iter()
                .enumerate()
                .filter(|&(j, dj)| dj.is_finite() && raw.is_observed(j))
                .map(|(j, &dj)| (j, weight(dj, sigma)));
            if let Some(row) = weighted_mean(raw, terms) {
                return row;
            }
            let nearest = graph
                .nearest_matching(i, |j| raw.is_observed(j))
                .map(|(j, _)| j)
                .unwrap_or_else(|| nearest_observed_in_space(raw, mesh, i));
            raw.row(nearest).to_vec()
        })
        .collect();
    Ok(smoothed(raw, rows, sigma))
}

fn nearest_observed_in_space(raw: &PointFeatureSet, mesh: &TriangleMesh, i: usize) -> usize {
    let p = mesh.vertices()[i];
    (0..raw.len())
        .filter(|&j| raw.is_observed(j))
        .min_by(|&a, &b| {
            let da = (mesh.vertices()[a] - p).norm_squared();
            let db = (mesh.vertices()[b] - p).norm_squared();
            da.total_cmp(&db).then(a.cmp(&b))
        })
        .expect("at least one observed point")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftOptions {
    /// Gaussian smoothing width; `None` disables re-weighting.
    pub sigma: Option<f64>,
    pub tolerance: VisibilityTolerance,
}

impl Default for LiftOptions {
    fn default() -> Self {
        Self {
            sigma: Some(super::DEFAULT_SIGMA),
            tolerance: VisibilityTolerance::default(),
        }
    }
}

/// Output of [`lift_features`]. `features` equals `raw` when smoothing is off.
#[derive(Debug, Clone)]
pub struct Lifted {
    pub raw: PointFeatureSet,
    pub features: PointFeatureSet,
    pub visibility: VisibilityMask,
    /// Mean class token over views, when every view map carries one.
    pub class_token: Option<Vec<f64>>,
}

/// Per-channel mean of the views' class tokens; `None` unless all have one.
pub fn mean_class_token(maps: &[FeatureMap]) -> Option<Vec<f64>> {
    let tokens: Vec<&[f32]> = maps.iter().map(FeatureMap::class_token).collect::<Option<_>>()?;
    let first = tokens.first()?;
    if tokens.iter().any(|t| t.len() != first.len()) {
        return None;
    }
    let mut mean = vec![0.0; first.len()];
    for t in &tokens {
        for (m, &v) in mean.iter_mut().zip(t.iter()) {
            *m += f64::from(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= tokens.len() as f64);
    Some(mean)
}

/// Render, test visibility, fetch per-view maps and back-project onto the
/// mesh vertices, then optionally smooth along the surface.
pub fn lift_features(
    mesh: &TriangleMesh,
    rig: &ViewRig,
    provider: &dyn FeatureProvider,
    opts: LiftOptions,
) -> Result<Lifted, FeatureError> {
    let buffers = rasterize_rig(mesh, rig);
    let visibility = vertex_visibility(mesh, rig, &buffers, opts.tolerance);
    let maps = rig
        .views
        .par_iter()
        .zip(&buffers)
        .map(|(view, fb)| {
            provider.feature_map(&ViewContext {
                mesh,
                view,
                intrinsics: &rig.intrinsics,
                buffers: fb,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let raw = backproject(&vertex_points(mesh), rig, &visibility, &maps, provider.id().as_str())?;
    let unseen = visibility.never_visible().len();
    if unseen > 0 {
        log::info!("{unseen} of {} vertices are never visible", mesh.vertex_count());
    }
    let features = match opts.sigma {
        Some(sigma) => gaussian_reweight_mesh(&raw, mesh, &EdgeGraph::from_mesh(mesh), sigma)?,
        None => raw.clone(),
    };
    Ok(Lifted {
        raw,
        features,
        visibility,
        class_token: mean_class_token(&maps),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> (PointFeatureSet, GeodesicMatrix) {
        let raw = PointFeatureSet::new(1, vec![0.0, 0.0, 1.0], vec![1, 0, 1], "test");
        let g = GeodesicMatrix::from_dense(vec![0, 1, 2], vec![0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0]).unwrap();
        (raw, g)
    }

    #[test]
    fn three_vertex_chain_middle_is_half() {
        let (raw, g) = chain();
        let out = gaussian_reweight(&raw, &g, 1.0).unwrap();
        assert!((out.row(1)[0] - 0.5).abs() <= 1e-12);
        assert_eq!(out.sigma, Some(1.0));
        assert_eq!(out.counts(), raw.counts());
    }

    #[test]
    fn tiny_sigma_keeps_own_feature_and_falls_back() {
        let (raw, g) = chain();
        let out = gaussian_reweight(&raw, &g, 1e-3).unwrap();
        assert_eq!(out.row(0), &[0.0]);
        assert_eq!(out.row(2), &[1.0]);
        // All weights underflow for the middle point; ties go to the lower id.
        assert_eq!(out.row(1), &[0.0]);
    }

    #[test]
    fn class_tokens_average_over_views() {
        let map = |id, token: Option<Vec<f32>>| FeatureMap::new(id, 1, 1, 2, vec![0.0, 0.0], token).unwrap();
        let maps = [map(0, Some(vec![1.0, 2.0])), map(1, Some(vec![3.0, -2.0]))];
        assert_eq!(mean_class_token(&maps), Some(vec![2.0, 0.0]));
        assert_eq!(mean_class_token(&[maps[0].clone(), map(2, None)]), None);
    }

    #[test]
    fn errors() {
        let (raw, g) = chain();
        assert!(matches!(gaussian_reweight(&raw, &g, 0.0), Err(FeatureError::InvalidSigma(_))));
        let none = PointFeatureSet::new(1, vec![0.0; 3], vec![0; 3], "test");
        assert!(matches!(gaussian_reweight(&none, &g, 1.0), Err(FeatureError::NoVisiblePoints)));
        let small = PointFeatureSet::new(1, vec![0.0; 2], vec![1; 2], "test");
        assert!(matches!(gaussian_reweight(&small, &g, 1.0), Err(FeatureError::CoverageMismatch(2))));
    }

    #[test]
    fn cutoff_weight_underflows() {
        assert_eq!(weight(cutoff(0.003), 0.003), 0.0);
        assert!(weight(cutoff(0.003) * 0.999, 0.003) >= 0.0);
    }
}
