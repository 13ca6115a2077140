//! Gradient descent on the selection logits and argmax extraction.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::objective::{column_argmax, objective_and_gradient, row_softmax, Objective};
use super::{CandidateSet, FewShotTemplate, KeypointError, KeypointPrediction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub alpha: f64,
    pub beta: f64,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            alpha: 4.0,
            beta: 0.0,
            steps: 5000,
            learning_rate: 0.05,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), KeypointError> {
        if self.steps == 0 {
            return Err(KeypointError::Config("steps must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(KeypointError::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(KeypointError::Config("alpha and beta must be finite".into()));
        }
        Ok(())
    }
}

/// Selection logits; `probabilities()` is the row-stochastic `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionState {
    pub logits: DMatrix<f64>,
    pub seed: u64,
    pub step: usize,
}

impl SelectionState {
    /// I.i.d. standard normal logits drawn row by row.
    pub fn random(n: usize, k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..n * (k + 1)).map(|_| rng.sample(StandardNormal)).collect();
        Self {
            logits: DMatrix::from_row_slice(n, k + 1, &values),
            seed,
            step: 0,
        }
    }

    pub fn probabilities(&self) -> DMatrix<f64> {
        row_softmax(&self.logits)
    }

    /// First `k` columns of `S`.
    pub fn selection(&self) -> DMatrix<f64> {
        let s = self.probabilities();
        s.columns(0, s.ncols() - 1).into_owned()
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationRun {
    pub state: SelectionState,
    /// Objective before each update; the last entry is the final state.
    pub trajectory: Vec<f64>,
    pub last: Objective,
}

/// Plain gradient descent from standard-normal logits. `observer` sees the
/// state and objective before every update and once more at the end.
pub fn optimize(
    tpl: &FewShotTemplate,
    cand: &CandidateSet,
    cfg: &OptimizerConfig,
    mut observer: impl FnMut(&SelectionState, &Objective),
) -> Result<OptimizationRun, KeypointError> {
    cfg.validate()?;
    let (n, k) = (cand.len(), tpl.k());
    if n <= k {
        return Err(KeypointError::TooFewCandidates { n, k });
    }
    let mut state = SelectionState::random(n, k, cfg.seed);
    let mut trajectory = Vec::with_capacity(cfg.steps + 1);
    loop {
        let (obj, grad) = objective_and_gradient(&state.logits, tpl, cand, cfg.alpha, cfg.beta, state.step)?;
        trajectory.push(obj.total);
        observer(&state, &obj);
        if state.step == cfg.steps {
            return Ok(OptimizationRun {
                state,
                trajectory,
                last: obj,
            });
        }
        state.logits -= grad * cfg.learning_rate;
        state.step += 1;
    }
}

/// One-hot `n × k` selection of the extracted keypoints.
pub fn hard_selection(pred: &KeypointPrediction, n: usize) -> DMatrix<f64> {
    let mut sh = DMatrix::zeros(n, pred.keypoints.len());
    for (j, kp) in pred.keypoints.iter().enumerate() {
        sh[(kp.candidate, j)] = 1.0;
    }
    sh
}

/// Keypoint `j` goes to the candidate maximizing column `j` of `Ŝ`.
pub fn extract(state: &SelectionState, tpl: &FewShotTemplate, cand: &CandidateSet) -> KeypointPrediction {
    let s = state.probabilities();
    let choices = column_argmax(&s, tpl.k());
    KeypointPrediction::from_choices(cand, &tpl.semantic_ids, &choices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    fn separable() -> (FewShotTemplate, CandidateSet) {
        // Candidate 3 equals the template; the others are orthogonal to it.
        let n = 6;
        let cf = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 });
        let cd = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 });
        let tpl = FewShotTemplate {
            semantic_ids: vec![9],
            features: cf.rows(3, 1).into_owned(),
            distances: DMatrix::zeros(1, 1),
            class_counts: vec![1],
            missing_pairs: vec![],
        };
        let cand = CandidateSet::new((10..16).collect(), vec![Point3::origin(); n], cf, cd).unwrap();
        (tpl, cand)
    }

    #[test]
    fn separable_optimum_is_found() {
        let (tpl, cand) = separable();
        let cfg = OptimizerConfig {
            alpha: 0.0,
            beta: 0.0,
            steps: 2000,
            learning_rate: 0.5,
            seed: 1,
        };
        let mut sums = Vec::new();
        let run = optimize(&tpl, &cand, &cfg, |st, _| {
            if st.step % 500 == 0 {
                sums.push(st.probabilities().row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max));
            }
        })
        .unwrap();
        assert_eq!(run.trajectory.len(), 2001);
        assert!(run.trajectory.last() < run.trajectory.first());
        assert!(sums.iter().all(|&e| e < 1e-6));
        let pred = extract(&run.state, &tpl, &cand);
        assert_eq!(pred.keypoints[0].candidate, 3);
        assert_eq!(pred.keypoints[0].vertex, 13);
        assert_eq!(pred.keypoints[0].semantic_id, 9);
    }

    #[test]
    fn same_seed_same_logits() {
        assert_eq!(SelectionState::random(5, 2, 7), SelectionState::random(5, 2, 7));
        assert_ne!(SelectionState::random(5, 2, 7), SelectionState::random(5, 2, 8));
    }

    #[test]
    fn extraction_ties_and_collapses() {
        let (_, cand) = separable();
        let tpl = FewShotTemplate {
            semantic_ids: vec![1, 2],
            features: DMatrix::zeros(2, 6),
            distances: DMatrix::zeros(2, 2),
            class_counts: vec![1, 1],
            missing_pairs: vec![],
        };
        let mut logits = DMatrix::from_element(6, 3, 0.0);
        logits[(7 % 6, 0)] = 3.0;
        let ln = |p: f64| p.ln();
        // Column 1: exact tie between rows 2 and 5.
        logits[(2, 1)] = ln(4.0);
        logits[(5, 1)] = ln(4.0);
        let st = SelectionState { logits, seed: 0, step: 0 };
        let pred = extract(&st, &tpl, &cand);
        assert_eq!(pred.candidates(), vec![1, 2]);
        assert!(pred.collapses.is_empty());

        let mut logits = DMatrix::from_element(6, 3, 0.0);
        logits[(4, 0)] = 2.0;
        logits[(4, 1)] = 2.0;
        let st = SelectionState { logits, seed: 0, step: 0 };
        let pred = extract(&st, &tpl, &cand);
        assert_eq!(pred.candidates(), vec![4, 4]);
        assert_eq!(pred.collapses, vec![(4, vec![1, 2])]);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig { steps: 0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        let d = OptimizerConfig::default();
        assert_eq!((d.alpha, d.beta, d.steps, d.learning_rate), (4.0, 0.0, 5000, 0.05));
    }
}
