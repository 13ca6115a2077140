//! Keypoint IoU under a geodesic distance threshold.

use std::io::Write;

use crate::geometry::{
    farthest_point_sample, geodesic_distances, normalize_distances, GeodesicMatrix, MeshGeodesics, SeedRule, TriangleMesh,
};

use super::{format_float, EvalError};

/// Default threshold grid: 0.000, 0.005, …, 0.100.
pub fn default_thresholds() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 0.005).collect()
}

/// Distances between predicted (rows) and ground-truth (columns) points.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistances {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl PairDistances {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * cols);
        Self { rows, cols, values }
    }

    /// Look up `pred × gt` vertex distances in a matrix whose sources and
    /// targets contain them (either orientation).
    pub fn lookup(g: &GeodesicMatrix, pred: &[usize], gt: &[usize]) -> Result<Self, EvalError> {
        let find = |ids: &[usize], v: usize| ids.iter().position(|&x| x == v);
        let mut values = Vec::with_capacity(pred.len() * gt.len());
        for &p in pred {
            for &q in gt {
                let d = match (find(g.sources(), p), find(g.targets(), q)) {
                    (Some(r), Some(c)) => g.get(r, c),
                    _ => match (find(g.sources(), q), find(g.targets(), p)) {
                        (Some(r), Some(c)) => g.get(r, c),
                        _ => return Err(EvalError::NotInMatrix(if find(g.sources(), p).is_none() { p } else { q })),
                    },
                };
                values.push(d);
            }
        }
        Ok(Self::new(pred.len(), gt.len(), values))
    }

    pub fn get(&self, pred: usize, gt: usize) -> f64 {
        self.values[pred * self.cols + gt]
    }
}

/// Geodesic distances between predicted and ground-truth vertices on a
/// mesh, normalized by the largest distance among them and `extra_samples`
/// farthest-point samples (a stand-in for the mesh diameter).
pub fn mesh_pair_distances(
    mesh: &TriangleMesh,
    pred: &[usize],
    gt: &[usize],
    extra_samples: usize,
) -> Result<PairDistances, EvalError> {
    let mut ids: Vec<usize> = pred.iter().chain(gt).copied().collect();
    let extra = extra_samples.min(mesh.vertex_count());
    if extra > 0 {
        ids.extend(farthest_point_sample(&MeshGeodesics::new(mesh), extra, SeedRule::Fixed(0))?.indices);
    }
    ids.sort_unstable();
    ids.dedup();
    let g = normalize_distances(&geodesic_distances(mesh, &ids, &ids)?)?;
    PairDistances::lookup(&g, pred, gt)
}

/// One-to-one greedy matching: pairs in ascending distance (ties by pred
/// then gt index), accepted when both sides are free and the distance is
/// below `threshold`. Returns the accepted pairs.
pub fn greedy_matching(d: &PairDistances, threshold: f64) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(f64, usize, usize)> = (0..d.rows)
        .flat_map(|p| (0..d.cols).map(move |g| (p, g)))
        .map(|(p, g)| (d.get(p, g), p, g))
        .filter(|&(dist, _, _)| dist < threshold)
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut pred_used = vec![false; d.rows];
    let mut gt_used = vec![false; d.cols];
    let mut out = Vec::new();
    for (_, p, g) in pairs {
        if !pred_used[p] && !gt_used[g] {
            pred_used[p] = true;
            gt_used[g] = true;
            out.push((p, g));
        }
    }
    out
}

/// Maximum number of one-to-one pairs with distance below `threshold`, by
/// exhaustive search. Exponential; meant for small instances.
pub fn optimal_match_count(d: &PairDistances, threshold: f64) -> usize {
    fn search(d: &PairDistances, t: f64, p: usize, used: &mut [bool]) -> usize {
        if p == d.rows {
            return 0;
        }
        let mut best = search(d, t, p + 1, used);
        for g in 0..d.cols {
            if !used[g] && d.get(p, g) < t {
                used[g] = true;
                best = best.max(1 + search(d, t, p + 1, used));
                used[g] = false;
            }
        }
        best
    }
    search(d, threshold, 0, &mut vec![false; d.cols])
}

/// `M / (|pred| + |gt| − M)` for `M` matched pairs. Two empty sets score 1.
pub fn iou_from_matches(matched: usize, pred: usize, gt: usize) -> f64 {
    let union = pred + gt - matched;
    if union == 0 {
        1.0
    } else {
        matched as f64 / union as f64
    }
}

pub fn keypoint_iou(d: &PairDistances, threshold: f64) -> f64 {
    iou_from_matches(greedy_matching(d, threshold).len(), d.rows, d.cols)
}

/// Mean IoU per threshold over a set of shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct IoUCurve {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
}

impl IoUCurve {
    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }
}

pub fn shape_curve(d: &PairDistances, thresholds: &[f64]) -> IoUCurve {
    IoUCurve {
        thresholds: thresholds.to_vec(),
        values: thresholds.iter().map(|&t| keypoint_iou(d, t)).collect(),
    }
}

/// Per-threshold mean over shapes, in shape order.
pub fn iou_curve(shapes: &[PairDistances], thresholds: &[f64]) -> IoUCurve {
    let curves: Vec<IoUCurve> = shapes.iter().map(|d| shape_curve(d, thresholds)).collect();
    mean_curve(&curves, thresholds)
}

pub fn mean_curve(curves: &[IoUCurve], thresholds: &[f64]) -> IoUCurve {
    let values = (0..thresholds.len())
        .map(|i| {
            if curves.is_empty() {
                0.0
            } else {
                curves.iter().map(|c| c.values[i]).sum::<f64>() / curves.len() as f64
            }
        })
        .collect();
    IoUCurve {
        thresholds: thresholds.to_vec(),
        values,
    }
}

/// Long-format CSV `class,threshold,iou`: one block per class, then the
/// aggregate block labeled `all` (mean over every shape).
pub fn write_curve_csv(
    per_class: &[(String, Vec<IoUCurve>)],
    thresholds: &[f64],
    out: impl Write,
) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["class", "threshold", "iou"])?;
    let mut all = Vec::new();
    let emit = |w: &mut csv::Writer<_>, name: &str, c: &IoUCurve| -> Result<(), EvalError> {
        for (t, v) in c.thresholds.iter().zip(&c.values) {
            w.write_record([name, &format_float(*t), &format_float(*v)])?;
        }
        Ok(())
    };
    for (name, curves) in per_class {
        emit(&mut w, name, &mean_curve(curves, thresholds))?;
        all.extend(curves.iter().cloned());
    }
    emit(&mut w, "all", &mean_curve(&all, thresholds))?;
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Mean over thresholds of `(ours − base) / base`, skipping thresholds where
/// the baseline is zero. `None` if every baseline value is zero.
pub fn mean_relative_improvement(ours: &IoUCurve, baseline: &IoUCurve) -> Option<f64> {
    let ratios: Vec<f64> = ours
        .values
        .iter()
        .zip(&baseline.values)
        .filter(|(_, &b)| b != 0.0)
        .map(|(&o, &b)| (o - b) / b)
        .collect();
    (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_disjoint() {
        let d = PairDistances::new(2, 2, vec![0.0, 0.5, 0.5, 0.0]);
        assert_eq!(keypoint_iou(&d, 0.01), 1.0);
        assert_eq!(keypoint_iou(&d, 0.0), 0.0);
        let far = PairDistances::new(2, 3, vec![0.9; 6]);
        assert_eq!(keypoint_iou(&far, 0.1), 0.0);
    }

    #[test]
    fn two_of_three_matched() {
        let d = PairDistances::new(3, 3, vec![0.01, 0.5, 0.5, 0.5, 0.02, 0.5, 0.5, 0.5, 0.5]);
        assert_eq!(keypoint_iou(&d, 0.05), 0.5);
    }

    #[test]
    fn one_prediction_matches_once() {
        let d = PairDistances::new(1, 2, vec![0.01, 0.02]);
        assert_eq!(greedy_matching(&d, 0.1), vec![(0, 0)]);
        assert_eq!(keypoint_iou(&d, 0.1), 0.5);
    }

    #[test]
    fn curve_csv_layout() {
        let t = vec![0.0, 0.05, 0.1];
        let perfect = shape_curve(&PairDistances::new(1, 1, vec![0.0]), &t);
        let half = shape_curve(&PairDistances::new(1, 1, vec![0.07]), &t);
        assert_eq!(perfect.values, vec![0.0, 1.0, 1.0]);
        assert!(half.is_monotone());
        let mut buf = Vec::new();
        write_curve_csv(&[("chair".into(), vec![perfect.clone()]), ("table".into(), vec![half.clone()])], &t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "class,threshold,iou");
        assert_eq!(lines[2], "chair,0.05,1");
        assert_eq!(lines.len(), 1 + 3 * 3);
        assert_eq!(lines[9], "all,0.1,1");
        assert_eq!(lines[8], "all,0.05,0.5");
    }

    #[test]
    fn oracle_beats_greedy_on_a_line() {
        // Points on a line: pred at 0 and 0.3, gt at 0.1 and -0.3.
        let d = PairDistances::new(2, 2, vec![0.1, 0.3, 0.2, 0.6]);
        assert_eq!(greedy_matching(&d, 0.35).len(), 1);
        assert_eq!(optimal_match_count(&d, 0.35), 2);
    }

    #[test]
    fn mesh_distances_are_normalized() {
        let mesh = crate::geometry::primitives::icosphere(2, 1.0);
        let d = mesh_pair_distances(&mesh, &[0, 1], &[0, 5, 9], 32).unwrap();
        assert_eq!(d.get(0, 0), 0.0);
        assert!(d.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(matches!(mesh_pair_distances(&mesh, &[9999], &[0], 0), Err(EvalError::Geometry(_))));
    }

    #[test]
    fn relative_improvement() {
        let a = IoUCurve { thresholds: vec![0.0, 0.1, 0.2], values: vec![0.1, 0.4, 0.6] };
        let b = IoUCurve { thresholds: vec![0.0, 0.1, 0.2], values: vec![0.0, 0.2, 0.4] };
        assert!((mean_relative_improvement(&a, &b).unwrap() - 0.75).abs() < 1e-12);
    }
}
