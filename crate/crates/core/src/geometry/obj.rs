//! Minimal Wavefront OBJ reader/writer.
//!
//! Only `v x y z` and `f i j k ...` records are interpreted. Indices are
//! 1-based; anything after a `/` in a face token (texture/normal indices) is
//! ignored. Polygons are fan-triangulated around their first vertex.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use nalgebra::Point3;

use super::{GeometryError, TriangleMesh};

/// A parsed mesh together with the number of degenerate faces dropped.
#[derive(Debug, Clone)]
pub struct LoadedMesh {
    pub mesh: TriangleMesh,
    pub dropped_faces: usize,
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<LoadedMesh, GeometryError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| GeometryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_obj(io::BufReader::new(file)).map_err(|e| match e {
        GeometryError::Io { source, .. } => GeometryError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

pub fn parse_obj(reader: impl BufRead) -> Result<LoadedMesh, GeometryError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| GeometryError::Io {
            path: String::new(),
            source,
        })?;
        let lineno = lineno + 1;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut xyz = [0.0f64; 3];
                for c in &mut xyz {
                    let tok = tokens.next().ok_or_else(|| GeometryError::Parse {
                        line: lineno,
                        message: "vertex record needs 3 coordinates".into(),
                    })?;
                    *c = tok.parse().map_err(|_| GeometryError::Parse {
                        line: lineno,
                        message: format!("bad coordinate `{tok}`"),
                    })?;
                    if !c.is_finite() {
                        return Err(GeometryError::NonFiniteCoordinate(lineno));
                    }
                }
                vertices.push(Point3::from(xyz));
            }
            Some("f") => {
                let idx = tokens
                    .map(|tok| parse_face_index(tok, lineno))
                    .collect::<Result<Vec<_>, _>>()?;
                if idx.len() < 3 {
                    return Err(GeometryError::Parse {
                        line: lineno,
                        message: "face record needs at least 3 indices".into(),
                    });
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    if faces.is_empty() {
        return Err(GeometryError::NoValidFaces);
    }
    let (mesh, dropped_faces) = TriangleMesh::from_raw(vertices, faces)?;
    Ok(LoadedMesh {
        mesh,
        dropped_faces,
    })
}

fn parse_face_index(tok: &str, line: usize) -> Result<usize, GeometryError> {
    let head = tok.split('/').next().unwrap_or_default();
    let value: i64 = head.parse().map_err(|_| GeometryError::Parse {
        line,
        message: format!("bad face index `{tok}`"),
    })?;
    if value <= 0 {
        return Err(GeometryError::Parse {
            line,
            message: format!("unsupported face index {value} (indices are 1-based and positive)"),
        });
    }
    Ok(value as usize - 1)
}

pub fn write_obj(mesh: &TriangleMesh, mut out: impl Write) -> io::Result<()> {
    for v in mesh.vertices() {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    fn parse(text: &str) -> Result<LoadedMesh, GeometryError> {
        parse_obj(io::Cursor::new(text))
    }

    #[test]
    fn tetrahedron_file() {
        let text = "# tet\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 1 4 3\nf 2 3 4\n";
        let m = parse(text).unwrap();
        assert_eq!(m.mesh.vertex_count(), 4);
        assert_eq!(m.mesh.face_count(), 4);
        assert_eq!(m.dropped_faces, 0);
    }

    #[test]
    fn quad_is_fan_triangulated() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 4/4/4\n";
        let m = parse(text).unwrap();
        assert_eq!(m.mesh.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn zero_area_face_is_dropped() {
        // Icosahedron gives 20 faces; keep 9 of them plus one repeated-vertex face.
        let ico = primitives::icosphere(0, 1.0);
        let mut text = Vec::new();
        for v in ico.vertices() {
            writeln!(text, "v {} {} {}", v.x, v.y, v.z).unwrap();
        }
        for f in &ico.faces()[..9] {
            writeln!(text, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
        }
        writeln!(text, "f 1 1 2").unwrap();
        let m = parse(std::str::from_utf8(&text).unwrap()).unwrap();
        assert_eq!(m.mesh.face_count(), 9);
        assert_eq!(m.dropped_faces, 1);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(parse("v 0 0 0\n"), Err(GeometryError::NoValidFaces)));
        assert!(matches!(
            parse("v 0 0 nan\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 3\n"),
            Err(GeometryError::NonFiniteCoordinate(1))
        ));
        assert!(matches!(
            parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf -1 -2 -3\n"),
            Err(GeometryError::Parse { line: 5, .. })
        ));
        assert!(matches!(
            load_mesh("/definitely/not/here.obj"),
            Err(GeometryError::Io { .. })
        ));
    }

    #[test]
    fn write_then_read() {
        let ico = primitives::icosphere(1, 0.5);
        let mut buf = Vec::new();
        write_obj(&ico, &mut buf).unwrap();
        let back = parse_obj(io::Cursor::new(buf)).unwrap().mesh;
        assert_eq!(back, ico);
    }
}
