//! Selection objective and its analytic gradient.
//!
//! With `Ŝ` the first `k` columns of the row-softmax `S`:
//!
//! ```text
//! L_feature  = ‖ŜᵀF − F_kp‖_F
//! L_distance = ‖ŜᵀDŜ − D_kp‖_F
//! R          = Σ_j (max_i Ŝ_ij − mean_i Ŝ_ij)
//! L          = L_feature + α L_distance − β R
//! ```

use nalgebra::DMatrix;

use super::{CandidateSet, FewShotTemplate, KeypointError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub total: f64,
    pub feature: f64,
    pub distance: f64,
    pub reward: f64,
}

/// Lowest objective over every hard assignment (each candidate to one
/// keypoint column or to none), by enumeration of all `(k+1)^n` choices.
/// Returns the objective and the per-candidate column. Refuses instances
/// with more than `10^7` assignments.
pub fn exhaustive_selection(
    tpl: &FewShotTemplate,
    cand: &CandidateSet,
    alpha: f64,
    beta: f64,
) -> Result<(Objective, Vec<Option<usize>>), KeypointError> {
    let (n, k) = (cand.len(), tpl.k());
    let total = ((k + 1) as f64).powi(n as i32);
    if total > 1e7 {
        return Err(KeypointError::Config(format!("{total} assignments is too many to enumerate")));
    }
    let mut digits = vec![0usize; n];
    let mut best: Option<(Objective, Vec<Option<usize>>)> = None;
    loop {
        let mut sh = DMatrix::zeros(n, k);
        for (i, &c) in digits.iter().enumerate() {
            if c < k {
                sh[(i, c)] = 1.0;
            }
        }
        let obj = selection_objective(&sh, tpl, cand, alpha, beta);
        if best.as_ref().is_none_or(|(b, _)| obj.total < b.total) {
            best = Some((obj, digits.iter().map(|&c| (c < k).then_some(c)).collect()));
        }
        let mut i = 0;
        while i < n && digits[i] == k {
            digits[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
        digits[i] += 1;
    }
    Ok(best.expect("at least one assignment"))
}

/// Numerically stable softmax of every row.
pub fn row_softmax(logits: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = logits.clone();
    for mut row in s.row_iter_mut() {
        let max = row.max();
        row.apply(|v| *v = (*v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    s
}

/// Row of the largest entry of each column, ties to the lowest row.
pub(crate) fn column_argmax(m: &DMatrix<f64>, cols: usize) -> Vec<(usize, f64)> {
    (0..cols)
        .map(|j| {
            let col = m.column(j);
            let mut best = 0;
            for i in 1..col.len() {
                if col[i] > col[best] {
                    best = i;
                }
            }
            (best, col[best])
        })
        .collect()
}

fn check(v: f64, step: usize, what: &'static str) -> Result<f64, KeypointError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(KeypointError::NonFinite { step, what })
    }
}

/// Objective of an explicit `n × k` selection `Ŝ` (soft or hard).
pub fn selection_objective(
    sh: &DMatrix<f64>,
    tpl: &FewShotTemplate,
    cand: &CandidateSet,
    alpha: f64,
    beta: f64,
) -> Objective {
    let n = sh.nrows();
    let feature = (sh.transpose() * &cand.features - &tpl.features).norm();
    let distance = (sh.transpose() * &cand.distances * sh - &tpl.distances).norm();
    let reward = column_argmax(sh, sh.ncols())
        .iter()
        .enumerate()
        .map(|(j, &(_, max))| max - sh.column(j).sum() / n as f64)
        .sum::<f64>();
    Objective {
        total: feature + alpha * distance - beta * reward,
        feature,
        distance,
        reward,
    }
}

/// Objective and gradient with respect to the `n × (k+1)` logits. `step` is
/// only used to label errors.
pub fn objective_and_gradient(
    logits: &DMatrix<f64>,
    tpl: &FewShotTemplate,
    cand: &CandidateSet,
    alpha: f64,
    beta: f64,
    step: usize,
) -> Result<(Objective, DMatrix<f64>), KeypointError> {
    let (n, k) = (cand.len(), tpl.k());
    if logits.nrows() != n || logits.ncols() != k + 1 {
        return Err(KeypointError::DimensionMismatch {
            expected: n * (k + 1),
            found: logits.len(),
        });
    }
    if cand.dim() != tpl.dim() {
        return Err(KeypointError::DimensionMismatch {
            expected: tpl.dim(),
            found: cand.dim(),
        });
    }
    let s = row_softmax(logits);
    let sh = s.columns(0, k);

    let b = sh.transpose() * &cand.features - &tpl.features;
    let feature = check(b.norm(), step, "feature loss")?;

    let p = &cand.distances * sh;
    let a = sh.transpose() * &p - &tpl.distances;
    let distance = check(a.norm(), step, "distance loss")?;

    let argmax = column_argmax(&s, k);
    let reward = argmax
        .iter()
        .enumerate()
        .map(|(j, &(_, max))| max - sh.column(j).sum() / n as f64)
        .sum::<f64>();

    let mut g = DMatrix::<f64>::zeros(n, k);
    if feature > 0.0 {
        g += &cand.features * b.transpose() / feature;
    }
    if distance > 0.0 && alpha != 0.0 {
        g += (&p * (&a + a.transpose())) * (alpha / distance);
    }
    if beta != 0.0 {
        g.add_scalar_mut(beta / n as f64);
        for (j, &(i, _)) in argmax.iter().enumerate() {
            g[(i, j)] -= beta;
        }
    }

    // Softmax backward per row; the last column carries no direct gradient.
    let mut grad = DMatrix::<f64>::zeros(n, k + 1);
    for i in 0..n {
        let dot: f64 = (0..k).map(|j| s[(i, j)] * g[(i, j)]).sum();
        for j in 0..=k {
            let gij = if j < k { g[(i, j)] } else { 0.0 };
            grad[(i, j)] = s[(i, j)] * (gij - dot);
        }
    }
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(KeypointError::NonFinite { step, what: "gradient" });
    }
    let total = check(feature + alpha * distance - beta * reward, step, "objective")?;
    Ok((
        Objective {
            total,
            feature,
            distance,
            reward,
        },
        grad,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn template(f: DMatrix<f64>, d: DMatrix<f64>) -> FewShotTemplate {
        let k = f.nrows();
        FewShotTemplate {
            semantic_ids: (0..k as u32).collect(),
            features: f,
            distances: d,
            class_counts: vec![1; k],
            missing_pairs: vec![],
        }
    }

    fn candidates(f: DMatrix<f64>, d: DMatrix<f64>) -> CandidateSet {
        let n = f.nrows();
        CandidateSet::new((0..n).collect(), vec![Point3::origin(); n], f, d).unwrap()
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let z = DMatrix::from_row_slice(2, 3, &[1000.0, 0.0, -1000.0, 1.0, 1.0, 1.0]);
        let s = row_softmax(&z);
        assert_eq!(s[(0, 0)], 1.0);
        for r in s.row_iter() {
            assert!((r.sum() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_hard_selection_has_zero_loss() {
        // Candidates 2 and 0 carry the template features and distances.
        let cf = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 5.0, 5.0, 1.0, 0.0]);
        let cd = DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 1.0, 0.5, 0.0, 0.7, 1.0, 0.7, 0.0]);
        let tpl = template(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        );
        let cand = candidates(cf, cd);
        let mut z = DMatrix::from_element(3, 3, -800.0);
        z[(2, 0)] = 0.0;
        z[(0, 1)] = 0.0;
        z[(1, 2)] = 0.0;
        let (obj, _) = objective_and_gradient(&z, &tpl, &cand, 4.0, 0.0, 0).unwrap();
        assert_eq!(obj.feature, 0.0);
        assert_eq!(obj.distance, 0.0);
    }

    #[test]
    fn uniform_selection_matches_dense_reference() {
        let (n, k, d) = (6, 2, 3);
        let c = [0.3, -1.0, 2.0];
        let cf = DMatrix::from_fn(n, d, |_, j| c[j]);
        let cd = DMatrix::from_fn(n, n, |i, j| ((i as f64) - (j as f64)).abs() / 5.0);
        let tf = DMatrix::from_row_slice(k, d, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let td = DMatrix::from_row_slice(k, k, &[0.0, 0.4, 0.4, 0.0]);
        let tpl = template(tf.clone(), td.clone());
        let cand = candidates(cf, cd.clone());
        let (obj, _) = objective_and_gradient(&DMatrix::zeros(n, k + 1), &tpl, &cand, 4.0, 1.0, 0).unwrap();
        // Every entry of S is 1/(k+1); each row of ŜᵀF is (n/(k+1))·c.
        let w = n as f64 / (k + 1) as f64;
        let mut fsq = 0.0;
        for r in 0..k {
            for j in 0..d {
                fsq += (w * c[j] - tf[(r, j)]).powi(2);
            }
        }
        let sd: f64 = cd.iter().sum::<f64>() / ((k + 1) * (k + 1)) as f64;
        let mut dsq = 0.0;
        for r in 0..k {
            for q in 0..k {
                dsq += (sd - td[(r, q)]).powi(2);
            }
        }
        assert!((obj.feature - fsq.sqrt()).abs() < 1e-12);
        assert!((obj.distance - dsq.sqrt()).abs() < 1e-12);
        // max equals mean in every column.
        assert!(obj.reward.abs() < 1e-15);
        assert!((obj.total - (obj.feature + 4.0 * obj.distance)).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, k, d) = (7, 2, 3);
        let mut normal = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
        let cf = normal(n, d);
        let raw = normal(n, n).abs();
        let cd = (&raw + raw.transpose()) / 2.0;
        let tf = normal(k, d);
        let traw = normal(k, k).abs();
        let td = (&traw + traw.transpose()) / 2.0;
        let z = normal(n, k + 1);
        let tpl = template(tf, td);
        let cand = candidates(cf, cd);
        for (alpha, beta) in [(0.0, 0.0), (4.0, 0.0), (4.0, 1.0)] {
            let (_, g) = objective_and_gradient(&z, &tpl, &cand, alpha, beta, 0).unwrap();
            let h = 1e-6;
            for idx in 0..z.len() {
                let mut zp = z.clone();
                zp[idx] += h;
                let mut zm = z.clone();
                zm[idx] -= h;
                let lp = objective_and_gradient(&zp, &tpl, &cand, alpha, beta, 0).unwrap().0.total;
                let lm = objective_and_gradient(&zm, &tpl, &cand, alpha, beta, 0).unwrap().0.total;
                let fd = (lp - lm) / (2.0 * h);
                assert!((fd - g[idx]).abs() < 1e-6 * (1.0 + fd.abs()), "{idx}: {fd} vs {}", g[idx]);
            }
        }
    }
}
