//! Part-label transfer by nearest neighbours in feature space.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use super::EvalError;
use crate::features::PointFeatureSet;

/// Per-point part labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationLabels {
    pub labels: Vec<u32>,
}

impl SegmentationLabels {
    /// One integer label per line; blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let labels = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim()
                    .parse()
                    .map_err(|_| EvalError::Labels(format!("line {}: `{}` is not a label", i + 1, l.trim())))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { labels })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?)
    }

    pub fn to_text(&self) -> String {
        self.labels.iter().map(|l| format!("{l}\n")).collect()
    }

    pub fn vocabulary(&self) -> Vec<u32> {
        let mut v = self.labels.clone();
        v.sort_unstable();
        v.dedup();
        v
    }
}

fn unit_rows(f: &PointFeatureSet) -> Vec<Vec<f64>> {
    (0..f.len())
        .map(|i| {
            let r = f.row(i);
            let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n == 0.0 {
                vec![0.0; r.len()]
            } else {
                r.iter().map(|x| x / n).collect()
            }
        })
        .collect()
}

/// Label every target point by majority vote among its `k` most
/// cosine-similar source points; a tied vote takes the nearest point's label.
pub fn transfer_labels(
    source: &PointFeatureSet,
    labels: &SegmentationLabels,
    target: &PointFeatureSet,
    k: usize,
) -> Result<SegmentationLabels, EvalError> {
    if source.is_empty() {
        return Err(EvalError::EmptySource);
    }
    if labels.labels.len() != source.len() {
        return Err(EvalError::Labels(format!(
            "{} labels for {} source points",
            labels.labels.len(),
            source.len()
        )));
    }
    if source.dim() != target.dim() {
        return Err(EvalError::DimensionMismatch {
            expected: source.dim(),
            found: target.dim(),
        });
    }
    let k = k.clamp(1, source.len());
    let src = unit_rows(source);
    let tgt = unit_rows(target);
    let out = tgt
        .par_iter()
        .map(|t| {
            let mut sims: Vec<(f64, usize)> = src
                .iter()
                .enumerate()
                .map(|(j, s)| (s.iter().zip(t).map(|(a, b)| a * b).sum::<f64>(), j))
                .collect();
            sims.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let nearest = labels.labels[sims[0].1];
            let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
            for &(_, j) in &sims[..k] {
                *votes.entry(labels.labels[j]).or_default() += 1;
            }
            let top = votes.values().copied().max().unwrap_or(0);
            let leaders: Vec<u32> = votes.iter().filter(|(_, &c)| c == top).map(|(&l, _)| l).collect();
            if leaders.len() == 1 {
                leaders[0]
            } else {
                nearest
            }
        })
        .collect();
    Ok(SegmentationLabels { labels: out })
}

/// Per-part IoU `TP / (TP + FP + FN)` over parts present in either labeling,
/// and their mean.
pub fn part_iou(pred: &SegmentationLabels, gt: &SegmentationLabels) -> Result<(BTreeMap<u32, f64>, f64), EvalError> {
    if pred.labels.len() != gt.labels.len() {
        return Err(EvalError::Labels(format!(
            "{} predicted labels for {} points",
            pred.labels.len(),
            gt.labels.len()
        )));
    }
    let mut parts: Vec<u32> = pred.labels.iter().chain(&gt.labels).copied().collect();
    parts.sort_unstable();
    parts.dedup();
    let per: BTreeMap<u32, f64> = parts
        .iter()
        .map(|&p| {
            let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
            for (&a, &b) in pred.labels.iter().zip(&gt.labels) {
                match (a == p, b == p) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fnn += 1,
                    _ => {}
                }
            }
            (p, tp as f64 / (tp + fp + fnn) as f64)
        })
        .collect();
    let mean = if per.is_empty() {
        1.0
    } else {
        per.values().sum::<f64>() / per.len() as f64
    };
    Ok((per, mean))
}

/// Transfer labels and score them against the target's ground truth.
pub fn segmentation_transfer(
    source: &PointFeatureSet,
    source_labels: &SegmentationLabels,
    target: &PointFeatureSet,
    target_labels: &SegmentationLabels,
    k: usize,
) -> Result<(SegmentationLabels, BTreeMap<u32, f64>, f64), EvalError> {
    let pred = transfer_labels(source, source_labels, target, k)?;
    let (per, mean) = part_iou(&pred, target_labels)?;
    Ok((pred, per, mean))
}
