use std::path::{Path, PathBuf};

use b23d_core::evaluation::{load_annotations, snap_entry, KeypointDatasetIndex, ShapeEntry};
use b23d_core::features::{load_point_features, PointFeatureSet};
use b23d_core::geometry::{load_mesh, GeodesicMatrix, MeshGeodesics, SeedRule, TriangleMesh};
use b23d_core::keypoints::{
    build_template, candidate_set, extract, fps_baseline, keypoint_geodesics, knn_match, optimize,
    retrieve_nearest_shape, AnnotatedShape, PredictionRecord, RecordKeypoint, TemplateShape,
};

use super::{ensure_dir, point_features_path, require, token_path};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::DetectArgs;

/// Raw mesh for snapping annotations and its unit-box normalization.
fn load_pair(path: &Path) -> CliResult<(TriangleMesh, TriangleMesh)> {
    let raw = load_mesh(path).map_err(|e| CliError::mesh(path, e))?.mesh;
    let (norm, _) = raw.normalize().map_err(|e| CliError::mesh(path, e))?;
    Ok((raw, norm))
}

fn load_features(dir: &Path, shape_id: &str, mesh: &TriangleMesh) -> CliResult<PointFeatureSet> {
    let path = point_features_path(dir, shape_id);
    if !path.is_file() {
        return Err(CliError::Input(format!("no features for shape {shape_id} at {}", path.display())));
    }
    let feats = load_point_features(&path)?;
    if feats.len() != mesh.vertex_count() {
        return Err(CliError::Format(format!(
            "{}: {} rows for {} vertices",
            path.display(),
            feats.len(),
            mesh.vertex_count()
        )));
    }
    Ok(feats)
}

fn load_token(dir: &Path, shape_id: &str) -> CliResult<Vec<f64>> {
    let path = token_path(&point_features_path(dir, shape_id));
    let text = std::fs::read_to_string(&path)
        .map_err(|_| CliError::Input(format!("no class token for shape {shape_id} at {}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

fn few_shot_entries<'a>(
    index: &'a KeypointDatasetIndex,
    class: Option<&str>,
    args: &DetectArgs,
    shots: usize,
) -> CliResult<Vec<&'a ShapeEntry>> {
    if let Some(ids) = &args.shot_ids {
        return ids
            .iter()
            .map(|id| {
                index
                    .find(id)
                    .map(|(_, e)| e)
                    .ok_or_else(|| CliError::Input(format!("few-shot shape {id} is not annotated")))
            })
            .collect();
    }
    let class = class.ok_or_else(|| {
        CliError::Input(format!("target {} is not annotated; pass --shot-ids", args.target))
    })?;
    let pool: Vec<&ShapeEntry> = index.classes[class].iter().filter(|e| e.shape_id != args.target).collect();
    let take = if shots == 0 { pool.len() } else { shots };
    if pool.len() < take.max(1) {
        return Err(CliError::Input(format!("class {class} has {} other shapes, need {}", pool.len(), take.max(1))));
    }
    Ok(pool.into_iter().take(take).collect())
}

struct Shot {
    shape: AnnotatedShape,
    features: PointFeatureSet,
    geodesics: GeodesicMatrix,
}

pub fn cmd_detect(args: &DetectArgs, mut cfg: RunConfig) -> CliResult<String> {
    let o = &args.optimizer;
    let opt = &mut cfg.optimizer;
    opt.alpha = o.alpha.unwrap_or(opt.alpha);
    opt.beta = o.beta.unwrap_or(opt.beta);
    opt.steps = o.steps.unwrap_or(opt.steps);
    opt.learning_rate = o.learning_rate.unwrap_or(opt.learning_rate);
    opt.seed = o.seed.unwrap_or(opt.seed);
    let d = &mut cfg.detect;
    d.method = args.method.clone().unwrap_or(d.method.clone());
    d.shots = args.shots.unwrap_or(d.shots);
    d.candidates = args.candidates.unwrap_or(d.candidates);
    d.retrieval |= args.retrieval;
    let p = &mut cfg.paths;
    p.annotations = args.annotations.clone().or(p.annotations.take());
    p.mesh_root = args.mesh_root.clone().or(p.mesh_root.take());
    p.features_dir = args.features.clone().or(p.features_dir.take());
    cfg.validate()?;
    let method = cfg.detect.method.as_str();
    if !matches!(method, "optimize" | "knn" | "fps") {
        return Err(CliError::Input(format!("unknown method `{method}`")));
    }

    let annotations = require(cfg.paths.annotations.as_ref(), "annotation file")?;
    let mesh_root = cfg.paths.mesh_root.clone().unwrap_or_else(|| PathBuf::from("."));
    let index = load_annotations(annotations, &mesh_root)?;
    let target = index.find(&args.target);
    let target_mesh_path = match (&args.target_mesh, target) {
        (Some(p), _) => p.clone(),
        (None, Some((_, e))) => e.mesh_path.clone(),
        (None, None) => return Err(CliError::Input(format!("no mesh for target {}", args.target))),
    };
    let shots = few_shot_entries(&index, target.map(|(c, _)| c), args, cfg.detect.shots)?;
    let (_, mesh) = load_pair(&target_mesh_path)?;

    let record = if method == "fps" {
        let counts: Vec<usize> = shots.iter().map(|e| e.keypoints.len()).collect();
        let sample = fps_baseline(&MeshGeodesics::new(&mesh), &counts)?;
        PredictionRecord {
            shape_id: args.target.clone(),
            keypoints: sample
                .indices
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let p = mesh.vertices()[v];
                    RecordKeypoint {
                        semantic_id: i as u32,
                        vertex: v,
                        position: [p.x, p.y, p.z],
                        score: 1.0,
                    }
                })
                .collect(),
            collapse_warnings: vec![],
            loss: None,
        }
    } else {
        let dir = require(cfg.paths.features_dir.as_ref(), "features directory")?;
        let mut loaded = shots
            .iter()
            .map(|e| {
                let (raw, norm) = load_pair(&e.mesh_path)?;
                let (shape, snaps) = snap_entry(e, &raw);
                log::info!("shape {}: max snap distance {:.4}", e.shape_id, snaps.iter().copied().fold(0.0, f64::max));
                let features = load_features(dir, &e.shape_id, &norm)?;
                let geodesics = keypoint_geodesics(&norm, &shape, cfg.detect.geodesic_samples)?;
                Ok(Shot { shape, features, geodesics })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let target_features = load_features(dir, &args.target, &mesh)?;
        if cfg.detect.retrieval {
            let tokens = shots.iter().map(|e| load_token(dir, &e.shape_id)).collect::<CliResult<Vec<_>>>()?;
            let best = retrieve_nearest_shape(&tokens, &load_token(dir, &args.target)?)?;
            log::info!("retrieved few-shot shape {}", shots[best].shape_id);
            loaded = vec![loaded.swap_remove(best)];
        }
        let views: Vec<TemplateShape<'_>> = loaded
            .iter()
            .map(|s| TemplateShape {
                shape: &s.shape,
                features: &s.features,
                geodesics: &s.geodesics,
            })
            .collect();
        let tpl = build_template(&views)?;
        let cand = candidate_set(&mesh, &target_features, cfg.detect.candidates, SeedRule::Fixed(0))?;
        if method == "knn" {
            PredictionRecord::new(&args.target, &knn_match(&tpl, &cand), None)
        } else {
            let mut rows = Vec::with_capacity(cfg.optimizer.steps + 1);
            let run = optimize(&tpl, &cand, &cfg.optimizer, |state, obj| {
                rows.push((state.step, *obj));
            })?;
            ensure_dir(&args.out)?;
            write_trajectory(&args.out.join(format!("{}.loss.csv", args.target)), &rows)?;
            PredictionRecord::new(&args.target, &extract(&run.state, &tpl, &cand), Some(run.last))
        }
    };
    ensure_dir(&args.out)?;
    let path = args.out.join(format!("{}.json", args.target));
    record.save(&path).map_err(|e| CliError::write(&path, e))?;
    cfg.echo(&args.out)?;
    Ok(format!(
        "{} keypoints on {} ({} method, {} collapse warnings) -> {}",
        record.keypoints.len(),
        args.target,
        method,
        record.collapse_warnings.len(),
        path.display()
    ))
}

fn write_trajectory(path: &Path, rows: &[(usize, b23d_core::keypoints::Objective)]) -> CliResult<()> {
    use b23d_core::evaluation::format_float;
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::write(path, e))?;
    let io = |e: csv::Error| CliError::write(path, e);
    w.write_record(["step", "total", "feature", "distance", "reward"]).map_err(io)?;
    for (step, o) in rows {
        w.write_record([
            step.to_string(),
            format_float(o.total),
            format_float(o.feature),
            format_float(o.distance),
            format_float(o.reward),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::write(path, e))
}
