use b23d_core::features::PointFeatureSet;
use b23d_core::fixtures::{four_leg_table, random_selection_instance, TABLE_LEGS};
use b23d_core::geometry::{primitives, SeedRule, TriangleMesh};
use b23d_core::keypoints::{
    build_template, candidate_set, exhaustive_selection, extract, hard_selection, keypoint_geodesics, knn_match,
    optimize, selection_objective, AnnotatedShape, OptimizerConfig, TemplateShape,
};
use std::collections::BTreeSet;

#[test]
fn rows_stay_stochastic_and_loss_falls() {
    for seed in 0..4 {
        let (tpl, cand) = random_selection_instance(20, 3, 8, seed);
        let cfg = OptimizerConfig { steps: 1000, seed, ..Default::default() };
        let mut worst: f64 = 0.0;
        let run = optimize(&tpl, &cand, &cfg, |state, _| {
            if state.step % 250 == 0 {
                let s = state.probabilities();
                for r in s.row_iter() {
                    worst = worst.max((r.sum() - 1.0).abs());
                }
            }
        })
        .unwrap();
        assert!(worst < 1e-6, "{worst}");
        assert!(run.last.total < run.trajectory[0], "seed {seed}");
    }
}

#[test]
fn knn_collapses_on_the_table() {
    let (tpl, cand) = four_leg_table();
    let legs: BTreeSet<usize> = knn_match(&tpl, &cand).candidates().into_iter().collect();
    assert!(legs.len() <= 2, "{legs:?}");
}

#[test]
fn optimization_spreads_over_the_legs() {
    let (tpl, cand) = four_leg_table();
    for seed in 0..3 {
        let cfg = OptimizerConfig { seed, ..Default::default() };
        let run = optimize(&tpl, &cand, &cfg, |_, _| {}).unwrap();
        let picked: BTreeSet<usize> = extract(&run.state, &tpl, &cand).candidates().into_iter().collect();
        assert_eq!(picked.len(), TABLE_LEGS, "seed {seed}: {picked:?}");
        assert!(picked.iter().all(|&c| c < TABLE_LEGS));
    }
}

#[test]
fn exhaustive_optimum_on_the_table_is_exact() {
    let (tpl, cand) = four_leg_table();
    let (best, assignment) = exhaustive_selection(&tpl, &cand, 4.0, 0.0).unwrap();
    assert!(best.total.abs() < 1e-12);
    let legs: BTreeSet<usize> = assignment.iter().take(TABLE_LEGS).flatten().copied().collect();
    assert_eq!(legs.len(), TABLE_LEGS);
    assert!(assignment[TABLE_LEGS..].iter().all(Option::is_none));
}

fn scale_case(mesh: &TriangleMesh) -> Vec<usize> {
    let normals = mesh.vertex_normals();
    let feats = PointFeatureSet::from_rows(3, normals.iter().flat_map(|n| [n.x, n.y, n.z]).collect());
    let v = mesh.vertices();
    let shape = AnnotatedShape::snapped("a", mesh, [(0, v[0]), (1, v[7]), (2, v[20])]);
    let g = keypoint_geodesics(mesh, &shape, 16).unwrap();
    let tpl = build_template(&[TemplateShape { shape: &shape, features: &feats, geodesics: &g }]).unwrap();
    let cand = candidate_set(mesh, &feats, 64, SeedRule::Fixed(0)).unwrap();
    let cfg = OptimizerConfig { steps: 300, ..Default::default() };
    let run = optimize(&tpl, &cand, &cfg, |_, _| {}).unwrap();
    extract(&run.state, &tpl, &cand).vertices()
}

#[test]
fn scaling_the_mesh_keeps_the_keypoints() {
    let mesh = primitives::icosphere(2, 1.0);
    let base = scale_case(&mesh);
    for s in [0.25, 3.0, 10.0] {
        assert_eq!(scale_case(&mesh.scaled(s)), base, "scale {s}");
    }
}

#[test]
fn hard_selection_round_trips_the_prediction() {
    let (tpl, cand) = four_leg_table();
    let run = optimize(&tpl, &cand, &OptimizerConfig { steps: 50, ..Default::default() }, |_, _| {}).unwrap();
    let pred = extract(&run.state, &tpl, &cand);
    let sh = hard_selection(&pred, cand.len());
    assert_eq!(sh.sum(), TABLE_LEGS as f64);
    let obj = selection_objective(&sh, &tpl, &cand, 4.0, 0.0);
    assert!(obj.total.is_finite());
}
