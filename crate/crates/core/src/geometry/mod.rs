//! Mesh ingestion, normalization, graph geodesics and farthest-point
//! sampling.

mod geodesic;
mod mesh;
mod obj;
pub mod primitives;
mod sampling;

pub use geodesic::{
    geodesic_distances, geodesic_distances_on, normalize_distances, EdgeGraph, GeodesicMatrix,
};
pub use mesh::{Normalization, TriangleMesh, DEGENERATE_AREA_RATIO};
pub use obj::{load_mesh, parse_obj, write_obj, LoadedMesh};
pub use sampling::{farthest_point_sample, DistanceSource, MeshGeodesics, SamplePoints, SeedRule};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("non-finite coordinate on line {0}")]
    NonFiniteCoordinate(usize),
    #[error("vertex {0} has a non-finite coordinate")]
    NonFiniteVertex(usize),
    #[error("mesh has no valid faces")]
    NoValidFaces,
    #[error("mesh needs at least 4 vertices, found {0}")]
    TooFewVertices(usize),
    #[error("face {face} references vertex {index} but the mesh has {vertex_count}")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("face {0} repeats a vertex")]
    RepeatedIndex(usize),
    #[error("bounding box has zero extent on every axis")]
    DegenerateBoundingBox,
    #[error("vertex {0} is out of range")]
    VertexOutOfRange(usize),
    #[error("expected {expected} values, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("distances must be finite and non-negative")]
    InvalidDistance,
    #[error("distance matrix has no positive entry")]
    AllZeroDistances,
    #[error("requested {requested} samples from {available} points")]
    TooManySamples { requested: usize, available: usize },
    #[error("sample count must be positive")]
    ZeroSamples,
}
