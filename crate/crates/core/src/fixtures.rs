//! Small synthetic instances with known answers.

use nalgebra::{DMatrix, Point3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::evaluation::PairDistances;
use crate::geometry::GeodesicMatrix;
use crate::keypoints::{CandidateSet, FewShotTemplate};

/// Number of leg-tip candidates in [`four_leg_table`]; they come first.
pub const TABLE_LEGS: usize = 4;

/// A table with four leg tips (candidates 0..4, at `(±1, 0, ±1)`) and four
/// top corners above them (candidates 4..8). All leg tips share one feature
/// vector and all top corners another, so features alone cannot tell the
/// legs apart. The template asks for the four leg tips with their true
/// relative distances; distances are Euclidean, normalized by their max.
pub fn four_leg_table() -> (FewShotTemplate, CandidateSet) {
    let legs = [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)];
    let mut pts: Vec<Point3<f64>> = legs.iter().map(|&(x, z)| Point3::new(x, 0.0, z)).collect();
    pts.extend(legs.iter().map(|&(x, z)| Point3::new(x, 0.5, z)));
    let n = pts.len();
    let mut d = DMatrix::from_fn(n, n, |i, j| (pts[i] - pts[j]).norm());
    let max = d.max();
    d /= max;
    let f = DMatrix::from_fn(n, 8, |i, j| {
        if (i < TABLE_LEGS && j == 0) || (i >= TABLE_LEGS && j == 1) {
            4.0
        } else {
            0.0
        }
    });
    let tpl = FewShotTemplate {
        semantic_ids: (0..TABLE_LEGS as u32).collect(),
        features: f.rows(0, TABLE_LEGS).into_owned(),
        distances: d.view((0, 0), (TABLE_LEGS, TABLE_LEGS)).into_owned(),
        class_counts: vec![1; TABLE_LEGS],
        missing_pairs: vec![],
    };
    let cand = CandidateSet::new((0..n).collect(), pts, f, d).expect("valid fixture");
    (tpl, cand)
}

/// Random template and candidates: normal features, symmetric non-negative
/// distance matrices with zero diagonals.
pub fn random_selection_instance(n: usize, k: usize, d: usize, seed: u64) -> (FewShotTemplate, CandidateSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let cf = normal(n, d);
    let tf = normal(k, d);
    let sym = |m: DMatrix<f64>| {
        let m = m.abs();
        let mut s = (&m + m.transpose()) / 2.0;
        s.fill_diagonal(0.0);
        s / m.max().max(f64::MIN_POSITIVE)
    };
    let cd = sym(normal(n, n));
    let td = sym(normal(k, k));
    let tpl = FewShotTemplate {
        semantic_ids: (0..k as u32).collect(),
        features: tf,
        distances: td,
        class_counts: vec![1; k],
        missing_pairs: vec![],
    };
    let cand = CandidateSet::new((0..n).collect(), vec![Point3::origin(); n], cf, cd).expect("valid instance");
    (tpl, cand)
}

/// Keypoint-evaluation instances: 1 to `max_points` predicted and
/// ground-truth vertices drawn uniformly from the ids of `g`, with their
/// distances looked up in `g`.
pub fn random_match_instances(g: &GeodesicMatrix, count: usize, max_points: usize, seed: u64) -> Vec<PairDistances> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = g.sources().to_vec();
    (0..count)
        .map(|_| {
            let np = rng.random_range(1..=max_points);
            let ng = rng.random_range(1..=max_points);
            let pred: Vec<usize> = (0..np).map(|_| ids[rng.random_range(0..ids.len())]).collect();
            let gt: Vec<usize> = (0..ng).map(|_| ids[rng.random_range(0..ids.len())]).collect();
            PairDistances::lookup(g, &pred, &gt).expect("ids come from the matrix")
        })
        .collect()
}
