use std::fs::File;
use std::io::BufWriter;

use b23d_core::raster::render_view;
use b23d_core::views::{sample_viewpoints, write_manifest, ManifestRecord};
use rayon::prelude::*;

use super::{ensure_dir, load_normalized};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::RenderArgs;

/// Manifest file written by `render`.
pub const MANIFEST_FILE: &str = "manifest.jsonl";

pub fn cmd_render(args: &RenderArgs, mut cfg: RunConfig) -> CliResult<String> {
    args.rig.apply(&mut cfg);
    cfg.validate()?;
    let mesh = load_normalized(&args.mesh)?;
    let intr = cfg.rig.intrinsics()?;
    let rig = sample_viewpoints(cfg.rig.n_slices, cfg.rig.distance, intr)?;
    ensure_dir(&args.out)?;
    let records = rig
        .views
        .par_iter()
        .map(|view| {
            let name = format!("{}.png", view.id);
            let path = args.out.join(&name);
            render_view(&mesh, view, &intr).save_png(&path).map_err(|e| CliError::write(&path, e))?;
            Ok(ManifestRecord::new(view, &intr, name))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let path = args.out.join(MANIFEST_FILE);
    let file = File::create(&path).map_err(|e| CliError::write(&path, e))?;
    write_manifest(&records, BufWriter::new(file)).map_err(|e| CliError::write(&path, e))?;
    cfg.echo(&args.out)?;
    Ok(format!("rendered {} views to {}", records.len(), args.out.display()))
}
