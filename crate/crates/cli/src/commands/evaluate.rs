use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use b23d_core::evaluation::{
    format_float, load_annotations, mesh_pair_distances, segmentation_transfer, shape_curve, snap_entry,
    stability_report, transfer_labels, write_curve_csv, write_stability_csv, IoUCurve, SegmentationLabels,
    StabilityAxis, StabilityBase,
};
use b23d_core::features::{load_point_features, FeatureProvider, ProviderId, SynthNormalProvider, SynthPositionProvider};
use b23d_core::geometry::load_mesh;
use b23d_core::keypoints::PredictionRecord;
use nalgebra::Matrix3;
use rayon::prelude::*;

use super::lift::lift_options;
use super::{ensure_dir, load_normalized, parent_dir, require};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::{EvalArgs, SegtransferArgs, StabilityArgs};

type ProviderFactory = Box<dyn Fn(&Matrix3<f64>) -> Box<dyn FeatureProvider>>;

fn prediction_files(path: &Path) -> CliResult<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = std::fs::read_dir(path).map_err(|e| CliError::io(path, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.is_file())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Input(format!("no prediction files in {}", path.display())));
    }
    Ok(files)
}

pub fn cmd_eval(args: &EvalArgs, mut cfg: RunConfig) -> CliResult<String> {
    if let Some(t) = &args.thresholds {
        cfg.eval.thresholds = t.clone();
    }
    let p = &mut cfg.paths;
    p.annotations = args.annotations.clone().or(p.annotations.take());
    p.mesh_root = args.mesh_root.clone().or(p.mesh_root.take());
    cfg.validate()?;
    let annotations = require(cfg.paths.annotations.as_ref(), "annotation file")?;
    let mesh_root = cfg.paths.mesh_root.clone().unwrap_or_else(|| PathBuf::from("."));
    let index = load_annotations(annotations, &mesh_root)?;
    let records = prediction_files(&args.predictions)?
        .into_iter()
        .map(|f| {
            PredictionRecord::load(&f).map_err(|e| CliError::Format(format!("{}: {e}", f.display())))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let thresholds = &cfg.eval.thresholds;
    let scored = records
        .par_iter()
        .map(|rec| {
            let Some((class, entry)) = index.find(&rec.shape_id) else {
                log::warn!("no annotations for {}; skipped", rec.shape_id);
                return Ok(None);
            };
            let mesh = load_mesh(&entry.mesh_path).map_err(|e| CliError::mesh(&entry.mesh_path, e))?.mesh;
            let (gt, _) = snap_entry(entry, &mesh);
            let pred: Vec<usize> = rec.keypoints.iter().map(|k| k.vertex).collect();
            if let Some(&v) = pred.iter().find(|&&v| v >= mesh.vertex_count()) {
                return Err(CliError::Format(format!("{}: vertex {v} out of range", rec.shape_id)));
            }
            let d = mesh_pair_distances(&mesh, &pred, &gt.vertices(), cfg.detect.geodesic_samples)?;
            Ok(Some((class.to_string(), shape_curve(&d, thresholds))))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut per_class: BTreeMap<String, Vec<IoUCurve>> = BTreeMap::new();
    for (class, curve) in scored.into_iter().flatten() {
        debug_assert!(curve.is_monotone());
        per_class.entry(class).or_default().push(curve);
    }
    if per_class.is_empty() {
        return Err(CliError::Input("no prediction matches an annotated shape".into()));
    }
    let shapes: usize = per_class.values().map(Vec::len).sum();
    let grouped: Vec<(String, Vec<IoUCurve>)> = per_class.into_iter().collect();
    let dir = parent_dir(&args.out)?;
    let file = File::create(&args.out).map_err(|e| CliError::write(&args.out, e))?;
    write_curve_csv(&grouped, thresholds, file)?;
    cfg.echo(&dir)?;
    let all: Vec<IoUCurve> = grouped.into_iter().flat_map(|(_, c)| c).collect();
    let mean = b23d_core::evaluation::mean_curve(&all, thresholds);
    let avg = mean.values.iter().sum::<f64>() / mean.values.len().max(1) as f64;
    Ok(format!(
        "evaluated {shapes} shapes; mean IoU over thresholds {} -> {}",
        format_float(avg),
        args.out.display()
    ))
}

pub fn cmd_segtransfer(args: &SegtransferArgs, mut cfg: RunConfig) -> CliResult<String> {
    cfg.eval.k_neighbors = args.k.unwrap_or(cfg.eval.k_neighbors);
    cfg.validate()?;
    let source = load_point_features(&args.source)?;
    let target = load_point_features(&args.target)?;
    let labels = SegmentationLabels::load(&args.source_labels)?;
    ensure_dir(&args.out)?;
    let labels_path = args.out.join("labels.txt");
    let k = cfg.eval.k_neighbors;
    let summary = match &args.target_labels {
        None => {
            let pred = transfer_labels(&source, &labels, &target, k)?;
            std::fs::write(&labels_path, pred.to_text()).map_err(|e| CliError::write(&labels_path, e))?;
            format!("labelled {} points -> {}", pred.labels.len(), labels_path.display())
        }
        Some(gt_path) => {
            let gt = SegmentationLabels::load(gt_path)?;
            let (pred, per, mean) = segmentation_transfer(&source, &labels, &target, &gt, k)?;
            std::fs::write(&labels_path, pred.to_text()).map_err(|e| CliError::write(&labels_path, e))?;
            let csv_path = args.out.join("part_iou.csv");
            let mut w = csv::Writer::from_path(&csv_path).map_err(|e| CliError::write(&csv_path, e))?;
            let err = |e: csv::Error| CliError::write(&csv_path, e);
            w.write_record(["part", "iou"]).map_err(err)?;
            for (part, iou) in &per {
                w.write_record([part.to_string(), format_float(*iou)]).map_err(err)?;
            }
            w.write_record(["mean".to_string(), format_float(mean)]).map_err(err)?;
            w.flush().map_err(|e| CliError::write(&csv_path, e))?;
            format!("labelled {} points; mean part IoU {}", pred.labels.len(), format_float(mean))
        }
    };
    cfg.echo(&args.out)?;
    Ok(summary)
}

/// Default sweep per axis.
pub fn default_sweep(axis: StabilityAxis) -> Vec<f64> {
    match axis {
        StabilityAxis::Views => (0..=6).map(f64::from).collect(),
        StabilityAxis::Distance => vec![1.2, 1.5, 1.8, 2.1, 2.4],
        StabilityAxis::Rotation => (0..16).map(|i| i as f64 * 22.5).collect(),
    }
}

pub fn cmd_stability(args: &StabilityArgs, mut cfg: RunConfig) -> CliResult<String> {
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
    cfg.validate()?;
    let axis: StabilityAxis = args.axis.parse().map_err(CliError::Input)?;
    let id: ProviderId = cfg.features.provider.parse().map_err(CliError::Input)?;
    let g = cfg.features.grid;
    let factory: ProviderFactory = match id {
        ProviderId::SynthPosition => Box::new(move |f| Box::new(SynthPositionProvider::new(g, g).with_frame(*f))),
        ProviderId::SynthNormal => Box::new(move |f| Box::new(SynthNormalProvider::new(g, g).with_frame(*f))),
        other => {
            return Err(CliError::Input(format!(
                "stability sweeps re-render features and need a synthetic provider, not `{other}`"
            )))
        }
    };
    let mesh = load_normalized(&args.mesh)?;
    let sweep = args.sweep.clone().unwrap_or_else(|| default_sweep(axis));
    let base = StabilityBase {
        n_slices: cfg.rig.n_slices,
        distance: cfg.rig.distance,
        intrinsics: cfg.rig.intrinsics()?,
        lift: lift_options(&cfg),
    };
    let rows = stability_report(&mesh, factory.as_ref(), axis, &sweep, &base)?;
    let dir = parent_dir(&args.out)?;
    let file = File::create(&args.out).map_err(|e| CliError::write(&args.out, e))?;
    write_stability_csv(&rows, file)?;
    cfg.echo(&dir)?;
    let worst = rows.iter().map(|r| r.mean).fold(f64::INFINITY, f64::min);
    Ok(format!(
        "{axis} sweep over {} values; lowest mean similarity {} -> {}",
        rows.len(),
        format_float(worst),
        args.out.display()
    ))
}
