use b23d_core::geometry::{geodesic_distances, normalize_distances, primitives, GeodesicMatrix, TriangleMesh};
use proptest::prelude::*;

fn fixtures() -> Vec<(&'static str, TriangleMesh)> {
    vec![
        ("tetrahedron", primitives::tetrahedron()),
        ("cuboid", primitives::cuboid([0.0, 0.0, 0.0].into(), [1.0, 0.5, 0.25].into())),
        ("icosphere", primitives::icosphere(2, 1.0)),
    ]
}

fn full(mesh: &TriangleMesh) -> GeodesicMatrix {
    let all: Vec<usize> = (0..mesh.vertex_count()).collect();
    geodesic_distances(mesh, &all, &all).unwrap()
}

#[test]
fn metric_properties_on_fixtures() {
    for (name, mesh) in fixtures() {
        let g = full(&mesh);
        let n = mesh.vertex_count();
        for i in 0..n {
            assert_eq!(g.get(i, i), 0.0, "{name}");
            for j in 0..n {
                assert!((g.get(i, j) - g.get(j, i)).abs() <= 1e-9, "{name} {i} {j}");
                for k in 0..n {
                    assert!(g.get(i, k) <= g.get(i, j) + g.get(j, k) + 1e-9, "{name} {i} {j} {k}");
                }
            }
        }
        let norm = normalize_distances(&g).unwrap();
        assert!(norm.is_normalized());
        assert!((norm.max() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sphere_antipodes_are_about_half_a_great_circle() {
    let r = 1.0;
    let mesh = primitives::icosphere(3, r);
    let g = full(&mesh);
    let v = mesh.vertices();
    for i in [0usize, 5, 17, 100] {
        let (anti, _) = mesh.nearest_vertex(&(-v[i].coords).into());
        let d = g.get(i, anti);
        assert!((d - std::f64::consts::PI * r).abs() <= 0.12 * std::f64::consts::PI * r, "{d}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scaling_the_mesh_scales_distances(s in 0.1f64..10.0, a in 0usize..42, b in 0usize..42) {
        let mesh = primitives::icosphere(1, 1.0);
        let big = mesh.scaled(s);
        let d = geodesic_distances(&mesh, &[a], &[b]).unwrap().get(0, 0);
        let ds = geodesic_distances(&big, &[a], &[b]).unwrap().get(0, 0);
        prop_assert!((ds - s * d).abs() <= 1e-9 * s.max(1.0));
    }
}
