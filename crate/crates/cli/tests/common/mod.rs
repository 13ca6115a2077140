#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use b23d_core::geometry::{primitives, write_obj, TriangleMesh};
use nalgebra::{Matrix3, Vector3};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_b23d"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn save_obj(mesh: &TriangleMesh, path: &Path) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    write_obj(mesh, std::fs::File::create(path).unwrap()).unwrap();
}

pub const CLASS: &str = "03001627";
pub const SHAPES: [&str; 3] = ["s0", "s1", "s2"];
/// Vertices annotated as keypoints 0, 1, 2 on every shape.
pub const KEYPOINT_VERTICES: [usize; 3] = [0, 5, 11];

/// Three slightly different ellipsoids sharing topology, their OBJ files
/// under `<root>/meshes/<class>/`, and an annotation file placing the same
/// semantic keypoints on the same vertices.
pub struct Dataset {
    pub root: PathBuf,
    pub meshes: PathBuf,
    pub annotations: PathBuf,
    pub features: PathBuf,
}

pub fn shape_mesh(i: usize) -> TriangleMesh {
    let s = 1.0 + 0.1 * i as f64;
    let m = Matrix3::from_diagonal(&Vector3::new(s, 1.0, 1.0 / s));
    primitives::icosphere(2, 1.0).transformed(&m, &Vector3::zeros())
}

pub fn dataset(root: &Path) -> Dataset {
    let meshes = root.join("meshes");
    let mut records = Vec::new();
    for (i, id) in SHAPES.iter().enumerate() {
        let mesh = shape_mesh(i);
        save_obj(&mesh, &meshes.join(CLASS).join(format!("{id}.obj")));
        let kps: Vec<serde_json::Value> = KEYPOINT_VERTICES
            .iter()
            .enumerate()
            .map(|(s, &v)| {
                let p = mesh.vertices()[v];
                serde_json::json!({"xyz": [p.x, p.y, p.z], "semantic_id": s})
            })
            .collect();
        records.push(serde_json::json!({"class_id": CLASS, "model_id": id, "keypoints": kps}));
    }
    let annotations = root.join("annotations.json");
    std::fs::write(&annotations, serde_json::Value::Array(records).to_string()).unwrap();
    Dataset {
        root: root.to_path_buf(),
        meshes,
        annotations,
        features: root.join("features"),
    }
}

impl Dataset {
    pub fn mesh_path(&self, id: &str) -> PathBuf {
        self.meshes.join(CLASS).join(format!("{id}.obj"))
    }

    /// Synthetic-normal point features for every shape, on a small rig.
    pub fn backproject_all(&self) {
        for id in SHAPES {
            let out = self.features.join(format!("{id}.pf"));
            let o = run(&[
                "backproject",
                self.mesh_path(id).to_str().unwrap(),
                "--provider",
                "synth-normal",
                "--n-slices",
                "2",
                "--resolution",
                "96",
                "--out",
                out.to_str().unwrap(),
            ]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        }
    }
}
