use std::fmt::Write as _;

use b23d_core::features::{
    lift_features, load_point_features, pca_rgb, save_point_features, ConstantProvider, FeatureProvider, FileProvider,
    LiftOptions, ProviderId, SynthNormalProvider, SynthPositionProvider,
};
use b23d_core::geometry::load_mesh;
use b23d_core::views::{load_manifest, rig_from_manifest, sample_viewpoints, ViewRig};

use super::{load_normalized, parent_dir, require, token_path};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::{BackprojectArgs, VizArgs};

/// Points used to fit the PCA colouring at most.
const PCA_FIT_POINTS: usize = 20_000;

pub(crate) fn provider_from(cfg: &RunConfig, features_dir: Option<&std::path::PathBuf>) -> CliResult<Box<dyn FeatureProvider>> {
    let id: ProviderId = cfg.features.provider.parse().map_err(CliError::Input)?;
    let g = cfg.features.grid;
    Ok(match id {
        ProviderId::File => Box::new(FileProvider::new(require(features_dir, "features directory for the file provider")?)),
        ProviderId::SynthPosition => Box::new(SynthPositionProvider::new(g, g)),
        ProviderId::SynthNormal => Box::new(SynthNormalProvider::new(g, g)),
        ProviderId::Constant => Box::new(ConstantProvider {
            value: vec![1.0],
            rows: g,
            cols: g,
        }),
    })
}

pub(crate) fn lift_options(cfg: &RunConfig) -> LiftOptions {
    LiftOptions {
        sigma: cfg.features.reweight.then_some(cfg.features.sigma),
        ..Default::default()
    }
}

pub fn cmd_backproject(args: &BackprojectArgs, mut cfg: RunConfig) -> CliResult<String> {
    args.rig.apply(&mut cfg);
    if let Some(p) = &args.provider {
        cfg.features.provider = p.clone();
    }
    if let Some(s) = args.sigma {
        cfg.features.sigma = s;
    }
    if args.no_reweight {
        cfg.features.reweight = false;
    }
    if args.manifest.is_some() {
        cfg.paths.manifest = args.manifest.clone();
    }
    if args.features.is_some() {
        cfg.paths.features_dir = args.features.clone();
    }
    cfg.validate()?;
    let mesh = load_normalized(&args.mesh)?;
    let rig: ViewRig = match &cfg.paths.manifest {
        Some(path) => rig_from_manifest(&load_manifest(path)?)?,
        None => sample_viewpoints(cfg.rig.n_slices, cfg.rig.distance, cfg.rig.intrinsics()?)?,
    };
    let provider = provider_from(&cfg, cfg.paths.features_dir.as_ref())?;
    let lifted = lift_features(&mesh, &rig, provider.as_ref(), lift_options(&cfg))?;
    let dir = parent_dir(&args.out)?;
    save_point_features(&lifted.features, &args.out).map_err(|e| CliError::write(&args.out, e))?;
    if let Some(token) = &lifted.class_token {
        let path = token_path(&args.out);
        let json = serde_json::to_string(token).expect("token serializes");
        std::fs::write(&path, json).map_err(|e| CliError::write(&path, e))?;
    }
    cfg.echo(&dir)?;
    let sigma = if cfg.features.reweight {
        cfg.features.sigma.to_string()
    } else {
        "off".into()
    };
    Ok(format!(
        "points {} dim {} never-visible {} sigma {} provider {}",
        lifted.features.len(),
        lifted.features.dim(),
        lifted.visibility.never_visible().len(),
        sigma,
        cfg.features.provider
    ))
}

pub fn cmd_viz(args: &VizArgs, cfg: RunConfig) -> CliResult<String> {
    cfg.validate()?;
    let mesh = load_mesh(&args.mesh).map_err(|e| CliError::mesh(&args.mesh, e))?.mesh;
    let feats = load_point_features(&args.features)?;
    if feats.len() != mesh.vertex_count() {
        return Err(CliError::Format(format!(
            "{} feature rows for {} vertices",
            feats.len(),
            mesh.vertex_count()
        )));
    }
    let stride = feats.len().div_ceil(PCA_FIT_POINTS).max(1);
    let fit: Vec<usize> = (0..feats.len()).step_by(stride).collect();
    let colors = pca_rgb(&feats, &fit)?;
    let mut text = String::with_capacity(48 * colors.len());
    for (p, c) in mesh.vertices().iter().zip(&colors) {
        let [r, g, b] = c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8);
        writeln!(text, "{} {} {} {r} {g} {b}", p.x, p.y, p.z).expect("string write");
    }
    let dir = parent_dir(&args.out)?;
    std::fs::write(&args.out, text).map_err(|e| CliError::write(&args.out, e))?;
    cfg.echo(&dir)?;
    Ok(format!("wrote {} coloured points to {}", colors.len(), args.out.display()))
}
