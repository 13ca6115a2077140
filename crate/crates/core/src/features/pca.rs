//! Three-component PCA colouring of point features.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{FeatureError, PointFeatureSet};

/// Relative eigenvalue below which a component counts as absent.
const RANK_TOL: f64 = 1e-12;

/// Fit a PCA on the rows in `fit`, project every point onto the top three
/// axes and min-max scale each component to `[0, 1]`. Each axis is signed so
/// its largest-magnitude loading is positive; missing components are 0.5.
pub fn pca_rgb(features: &PointFeatureSet, fit: &[usize]) -> Result<Vec<[f64; 3]>, FeatureError> {
    let (n, d) = (features.len(), features.dim());
    if n < 3 || d < 3 || fit.len() < 2 {
        return Err(FeatureError::TooSmallForPca);
    }
    if let Some(&bad) = fit.iter().find(|&&i| i >= n) {
        return Err(FeatureError::FitIndex(bad));
    }
    let x = DMatrix::from_row_slice(fit.len(), d, &features.select(fit));
    let mean: DVector<f64> = x.row_mean().transpose();
    let centered = DMatrix::from_fn(x.nrows(), d, |r, c| x[(r, c)] - mean[c]);
    let cov = centered.transpose() * &centered / (fit.len() - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let axes: Vec<Option<DVector<f64>>> = order[..3]
        .iter()
        .map(|&k| {
            let lambda = eig.eigenvalues[k];
            if top == 0.0 || lambda <= RANK_TOL * top {
                return None;
            }
            let mut axis: DVector<f64> = eig.eigenvectors.column(k).into_owned();
            let lead = axis.iter().copied().enumerate().fold((0, 0.0f64), |best, (i, v)| {
                if v.abs() > best.1.abs() {
                    (i, v)
                } else {
                    best
                }
            });
            if lead.1 < 0.0 {
                axis.neg_mut();
            }
            Some(axis)
        })
        .collect();
    let mut out = vec![[0.5; 3]; n];
    for (c, axis) in axes.iter().enumerate() {
        let Some(axis) = axis else { continue };
        let proj: Vec<f64> = (0..n)
            .map(|i| features.row(i).iter().zip(mean.iter()).zip(axis.iter()).map(|((v, m), a)| (v - m) * a).sum())
            .collect();
        let lo = proj.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (o, p) in out.iter_mut().zip(&proj) {
            o[c] = if hi > lo { (p - lo) / (hi - lo) } else { 0.5 };
        }
    }
    Ok(out)
}
