//! Nearest-neighbour matching, the farthest-point baseline and class-token
//! retrieval.

use super::{CandidateSet, FewShotTemplate, KeypointError, KeypointPrediction};
use crate::geometry::{farthest_point_sample, DistanceSource, SamplePoints, SeedRule};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index of the maximum, ties to the lowest index.
fn argmax(values: impl IntoIterator<Item = f64>) -> Option<(usize, f64)> {
    values.into_iter().enumerate().fold(None, |best, (i, v)| match best {
        Some((_, bv)) if v <= bv => best,
        _ => Some((i, v)),
    })
}

/// Each keypoint goes to the candidate with the highest cosine similarity to
/// its template feature. When the template row or any candidate row has zero
/// norm, that keypoint uses the Euclidean nearest candidate instead. Scores
/// are cosines clamped to `[0, 1]`, or `1 / (1 + distance)` for the fallback.
pub fn knn_match(tpl: &FewShotTemplate, cand: &CandidateSet) -> KeypointPrediction {
    let rows: Vec<Vec<f64>> = cand.features.row_iter().map(|r| r.iter().copied().collect()).collect();
    let norms: Vec<f64> = rows.iter().map(|r| norm(r)).collect();
    let any_zero = norms.contains(&0.0);
    let choices: Vec<(usize, f64)> = tpl
        .features
        .row_iter()
        .map(|t| {
            let t: Vec<f64> = t.iter().copied().collect();
            let tn = norm(&t);
            if tn == 0.0 || any_zero {
                let (i, neg) = argmax(rows.iter().map(|r| {
                    -r.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                }))
                .expect("candidates are not empty");
                (i, 1.0 / (1.0 - neg))
            } else {
                let (i, c) = argmax(rows.iter().zip(&norms).map(|(r, n)| dot(r, &t) / (n * tn)))
                    .expect("candidates are not empty");
                (i, c.clamp(0.0, 1.0))
            }
        })
        .collect();
    KeypointPrediction::from_choices(cand, &tpl.semantic_ids, &choices)
}

/// Mean keypoint count rounded half to even.
pub fn mean_keypoint_count(counts: &[usize]) -> usize {
    if counts.is_empty() {
        return 0;
    }
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    mean.round_ties_even() as usize
}

/// Unlabeled farthest-point keypoints: as many as the few-shot shapes have on
/// average, seeded at the vertex with the largest mean distance.
pub fn fps_baseline(metric: &impl DistanceSource, few_shot_counts: &[usize]) -> Result<SamplePoints, KeypointError> {
    let count = mean_keypoint_count(few_shot_counts).min(metric.point_count());
    Ok(farthest_point_sample(metric, count.max(1), SeedRule::MaxMeanDistance)?)
}

/// Labeled shape whose class token is most cosine-similar to `target`.
pub fn retrieve_nearest_shape(tokens: &[Vec<f64>], target: &[f64]) -> Result<usize, KeypointError> {
    if tokens.is_empty() || target.is_empty() {
        return Err(KeypointError::MissingTokens);
    }
    for t in tokens {
        if t.len() != target.len() {
            return Err(KeypointError::DimensionMismatch {
                expected: target.len(),
                found: t.len(),
            });
        }
    }
    let tn = norm(target);
    let sims = tokens.iter().map(|t| {
        let n = norm(t) * tn;
        if n == 0.0 {
            f64::NEG_INFINITY
        } else {
            dot(t, target) / n
        }
    });
    Ok(argmax(sims).expect("tokens are not empty").0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeodesicMatrix;
    use nalgebra::{DMatrix, Point3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tpl(features: DMatrix<f64>) -> FewShotTemplate {
        let k = features.nrows();
        FewShotTemplate {
            semantic_ids: (0..k as u32).collect(),
            features,
            distances: DMatrix::zeros(k, k),
            class_counts: vec![1; k],
            missing_pairs: vec![],
        }
    }

    fn cand(features: DMatrix<f64>) -> CandidateSet {
        let n = features.nrows();
        CandidateSet::new((0..n).collect(), vec![Point3::origin(); n], features, DMatrix::zeros(n, n)).unwrap()
    }

    #[test]
    fn identical_sets_match_identity() {
        let f = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.0, 1.0, 0.3, 0.1, 0.0, 1.0]);
        let p = knn_match(&tpl(f.clone()), &cand(f));
        assert_eq!(p.candidates(), vec![0, 1, 2]);
    }

    #[test]
    fn equal_template_features_collapse() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let c = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
        let p = knn_match(&tpl(t), &cand(c));
        assert_eq!(p.candidates(), vec![1, 1]);
        assert_eq!(p.collapses.len(), 1);
    }

    #[test]
    fn knn_agrees_with_brute_force_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let c = DMatrix::from_fn(15, 4, |_, _| rng.random_range(-1.0..1.0));
            let t = DMatrix::from_fn(3, 4, |_, _| rng.random_range(-1.0..1.0));
            let p = knn_match(&tpl(t.clone()), &cand(c.clone()));
            for j in 0..3 {
                let mut best = (0, f64::NEG_INFINITY);
                for i in 0..15 {
                    let cos = c.row(i).dot(&t.row(j)) / (c.row(i).norm() * t.row(j).norm());
                    if cos > best.1 {
                        best = (i, cos);
                    }
                }
                assert_eq!(p.keypoints[j].candidate, best.0);
            }
        }
    }

    #[test]
    fn zero_norm_uses_euclidean() {
        let t = DMatrix::from_row_slice(1, 2, &[0.0, 0.0]);
        let c = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.1, 0.1]);
        assert_eq!(knn_match(&tpl(t), &cand(c)).candidates(), vec![1]);
    }

    #[test]
    fn baseline_counts_and_seed() {
        assert_eq!(mean_keypoint_count(&[10, 10, 10]), 10);
        assert_eq!(mean_keypoint_count(&[9, 10, 12]), 10);
        assert_eq!(mean_keypoint_count(&[9, 10]), 10);
        assert_eq!(mean_keypoint_count(&[11, 10]), 10);
        let n = 5;
        let g = GeodesicMatrix::from_dense(
            (0..n).collect(),
            (0..n * n).map(|k| ((k / n) as f64 - (k % n) as f64).abs()).collect(),
        )
        .unwrap();
        let s = fps_baseline(&g, &[2, 2]).unwrap();
        assert_eq!(s.indices, vec![0, 4]);
    }

    #[test]
    fn retrieval() {
        let tokens = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert_eq!(retrieve_nearest_shape(&tokens, &[0.0, 1.0, 0.0]).unwrap(), 1);
        assert_eq!(retrieve_nearest_shape(&tokens, &[0.0, 0.1, 3.0]).unwrap(), 2);
        assert!(matches!(retrieve_nearest_shape(&[], &[1.0]), Err(KeypointError::MissingTokens)));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let tokens: Vec<Vec<f64>> = (0..8).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let target: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sims: Vec<f64> = tokens.iter().map(|t| dot(t, &target) / (norm(t) * norm(&target))).collect();
            let best = (0..8).fold(0, |b, i| if sims[i] > sims[b] { i } else { b });
            assert_eq!(retrieve_nearest_shape(&tokens, &target).unwrap(), best);
        }
    }
}
