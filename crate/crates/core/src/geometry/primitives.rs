//! Procedural meshes used by tests, fixtures and the CLI demos.

use std::collections::HashMap;

use nalgebra::Point3;

use super::TriangleMesh;

/// Regular tetrahedron inscribed in the unit cube, outward winding.
pub fn tetrahedron() -> TriangleMesh {
    let v = vec![
        Point3::new(1.0, 1.0, 1.0),
        Point3::new(1.0, -1.0, -1.0),
        Point3::new(-1.0, 1.0, -1.0),
        Point3::new(-1.0, -1.0, 1.0),
    ];
    let f = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    TriangleMesh::new(v, f).expect("valid tetrahedron")
}

/// Axis-aligned box with outward winding, 8 vertices and 12 faces.
///
/// Vertex `i` has coordinate bits `x = i & 1`, `y = i & 2`, `z = i & 4`.
pub fn cuboid(min: Point3<f64>, max: Point3<f64>) -> TriangleMesh {
    let v = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            )
        })
        .collect();
    let f = vec![
        [0, 2, 3], [0, 3, 1], // -z
        [4, 5, 7], [4, 7, 6], // +z
        [0, 1, 5], [0, 5, 4], // -y
        [2, 6, 7], [2, 7, 3], // +y
        [0, 4, 6], [0, 6, 2], // -x
        [1, 3, 7], [1, 7, 5], // +x
    ];
    TriangleMesh::new(v, f).expect("valid cuboid")
}

/// Geodesic icosphere: an icosahedron subdivided `subdivisions` times with
/// vertices pushed onto the sphere. Vertex count is `10 * 4^s + 2`.
///
/// The vertex set is closed under `p -> -p`.
pub fn icosphere(subdivisions: u32, radius: f64) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Point3<f64>> = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Point3::from(nalgebra::Vector3::new(x, y, z).normalize()))
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = if a < b { (a, b) } else { (b, a) };
                mid[k] = *midpoint.entry(key).or_insert_with(|| {
                    let m = nalgebra::center(&verts[a], &verts[b]);
                    verts.push(Point3::from(m.coords.normalize()));
                    verts.len() - 1
                });
            }
            next.push([f[0], mid[0], mid[2]]);
            next.push([f[1], mid[1], mid[0]]);
            next.push([f[2], mid[2], mid[1]]);
            next.push(mid);
        }
        faces = next;
    }
    let verts = verts.into_iter().map(|p| Point3::from(p.coords * radius)).collect();
    TriangleMesh::new(verts, faces).expect("valid icosphere")
}

/// Square in the plane `z = depth`, spanning `[-half, half]²`, normal +z.
pub fn square(half: f64, depth: f64) -> TriangleMesh {
    let v = vec![
        Point3::new(-half, -half, depth),
        Point3::new(half, -half, depth),
        Point3::new(half, half, depth),
        Point3::new(-half, half, depth),
    ];
    TriangleMesh::new(v, vec![[0, 1, 2], [0, 2, 3]]).expect("valid square")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts_and_antipodes() {
        for s in 0..3 {
            let m = icosphere(s, 0.5);
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(s) + 2);
            assert_eq!(m.face_count(), 20 * 4usize.pow(s));
            for v in m.vertices() {
                assert!((v.coords.norm() - 0.5).abs() < 1e-12);
                let (_, d) = m.nearest_vertex(&Point3::from(-v.coords));
                assert!(d < 1e-12);
            }
        }
    }

    #[test]
    fn outward_winding() {
        for m in [icosphere(2, 1.0), cuboid(Point3::new(-1.0, -1.0, -1.0), Point3::new(1.0, 1.0, 1.0)), tetrahedron()] {
            for (f, n) in m.faces().iter().zip(m.face_normals()) {
                let c = (m.vertices()[f[0]].coords + m.vertices()[f[1]].coords + m.vertices()[f[2]].coords) / 3.0;
                assert!(c.dot(n) > 0.0);
            }
        }
    }
}
