use b23d_core::geometry::{primitives, TriangleMesh};
use b23d_core::raster::{rasterize, rasterize_rig, vertex_visibility, VisibilityTolerance};
use b23d_core::views::{sample_viewpoints, Intrinsics, ViewRig, DEFAULT_DISTANCE};
use nalgebra::{Rotation3, Unit, Vector3};
use proptest::prelude::*;

fn sphere() -> TriangleMesh {
    primitives::icosphere(3, 1.0).normalize().unwrap().0
}

// About one edge of angular slack at 3 subdivisions: a silhouette vertex
// shows through any front-facing incident face.
const GRAZING: f64 = 0.15;

/// Fraction of vertices visible in each view, and the fraction of vertices
/// where visibility disagrees with the analytic test `n·(eye − p) > 0`
/// outside a grazing band.
fn visibility_vs_analytic(mesh: &TriangleMesh, rig: &ViewRig) -> Vec<(f64, f64)> {
    let vis = vertex_visibility(mesh, rig, &rasterize_rig(mesh, rig), VisibilityTolerance::default());
    let normals = mesh.vertex_normals();
    rig.views
        .iter()
        .enumerate()
        .map(|(j, view)| {
            let eye = view.pose.eye();
            let (mut seen, mut wrong) = (0, 0);
            for (i, p) in mesh.vertices().iter().enumerate() {
                let facing = normals[i].dot(&(eye - p).normalize());
                seen += vis.is_visible(i, j) as usize;
                if facing.abs() > GRAZING && (facing > 0.0) != vis.is_visible(i, j) {
                    wrong += 1;
                }
            }
            let n = mesh.vertex_count() as f64;
            (seen as f64 / n, wrong as f64 / n)
        })
        .collect()
}

#[test]
fn sphere_visibility_matches_normal_facing_test() {
    let mesh = sphere();
    let rig = sample_viewpoints(2, DEFAULT_DISTANCE, Intrinsics::default()).unwrap();
    for (j, (frac, wrong)) in visibility_vs_analytic(&mesh, &rig).into_iter().enumerate() {
        // Perspective cap seen from distance d: (1 − r/d) / 2 of the sphere.
        let cap = (1.0 - 0.5 / DEFAULT_DISTANCE) / 2.0;
        assert!((frac - cap).abs() < 0.08, "view {j}: {frac} vs {cap}");
        assert_eq!(wrong, 0.0, "view {j}");
    }
}

#[test]
fn distant_camera_sees_about_half_the_sphere() {
    let mesh = sphere();
    let distance = 20.0;
    let intr = Intrinsics::new(224, 224, 2.0 * (0.6f64 / distance).atan()).unwrap();
    let rig = sample_viewpoints(1, distance, intr).unwrap();
    for (j, (frac, wrong)) in visibility_vs_analytic(&mesh, &rig).into_iter().enumerate() {
        assert!((0.40..=0.60).contains(&frac), "view {j}: {frac}");
        assert_eq!(wrong, 0.0, "view {j}");
    }
}

#[test]
fn visibility_does_not_depend_on_view_order() {
    let mesh = sphere();
    let rig = sample_viewpoints(1, DEFAULT_DISTANCE, Intrinsics::default()).unwrap();
    let vis = vertex_visibility(&mesh, &rig, &rasterize_rig(&mesh, &rig), VisibilityTolerance::default());
    let mut views = rig.views.clone();
    views.reverse();
    let reversed = ViewRig { views, ..rig.clone() };
    let rvis = vertex_visibility(&mesh, &reversed, &rasterize_rig(&mesh, &reversed), VisibilityTolerance::default());
    let n = rig.len();
    for i in 0..mesh.vertex_count() {
        for j in 0..n {
            assert_eq!(vis.is_visible(i, j), rvis.is_visible(i, n - 1 - j));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    // Rotating object and cameras together leaves every frame buffer
    // essentially unchanged.
    #[test]
    fn joint_rotation_preserves_frames(ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0, angle in 0.1f64..3.0) {
        prop_assume!(ax * ax + ay * ay + az * az > 0.05);
        let mesh = primitives::cuboid([-0.5, -0.3, -0.2].into(), [0.5, 0.3, 0.2].into());
        let intr = Intrinsics::new(96, 96, std::f64::consts::FRAC_PI_3).unwrap();
        let rig = sample_viewpoints(1, DEFAULT_DISTANCE, intr).unwrap();
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(ax, ay, az)), angle);
        let moved = mesh.transformed(r.matrix(), &Vector3::zeros());
        let (mut diff, mut total) = (0usize, 0usize);
        for v in &rig.views {
            let a = rasterize(&mesh, &v.pose, &intr, v.id);
            let b = rasterize(&moved, &v.pose.rotated_with_world(&r), &intr, v.id);
            total += a.face.len();
            diff += a.face.iter().zip(&b.face).filter(|(x, y)| x != y).count();
        }
        prop_assert!((diff as f64) < 0.001 * total as f64, "{diff} of {total}");
    }
}
