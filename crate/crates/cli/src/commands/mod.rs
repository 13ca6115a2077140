mod detect;
mod evaluate;
mod lift;
mod render;

pub use detect::cmd_detect;
pub use evaluate::{cmd_eval, cmd_segtransfer, cmd_stability};
pub use lift::{cmd_backproject, cmd_viz};
pub use render::cmd_render;

use std::path::{Path, PathBuf};

use b23d_core::geometry::{load_mesh, TriangleMesh};

use crate::error::{CliError, CliResult};

/// Per-shape point features inside a features directory.
pub fn point_features_path(dir: &Path, shape_id: &str) -> PathBuf {
    dir.join(format!("{shape_id}.pf"))
}

/// Class-token sidecar written next to a point-features file.
pub fn token_path(features_file: &Path) -> PathBuf {
    features_file.with_extension("token.json")
}

/// Load an OBJ and normalize it into the unit box.
pub(crate) fn load_normalized(path: &Path) -> CliResult<TriangleMesh> {
    let loaded = load_mesh(path).map_err(|e| CliError::mesh(path, e))?;
    if loaded.dropped_faces > 0 {
        log::warn!("{}: dropped {} degenerate faces", path.display(), loaded.dropped_faces);
    }
    let (mesh, _) = loaded.mesh.normalize().map_err(|e| CliError::mesh(path, e))?;
    Ok(mesh)
}

pub(crate) fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))
}

/// Directory that holds an output file (created if needed).
pub(crate) fn parent_dir(file: &Path) -> CliResult<PathBuf> {
    let dir = match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    ensure_dir(&dir)?;
    Ok(dir)
}

pub(crate) fn require<'a, T>(value: Option<&'a T>, what: &str) -> CliResult<&'a T> {
    value.ok_or_else(|| CliError::Input(format!("missing {what}")))
}
