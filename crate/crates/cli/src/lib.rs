//! `b23d` command-line pipeline. Each subcommand is one stage with file
//! handoffs: render → (external extractor) → backproject → detect → eval.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_backproject, cmd_detect, cmd_eval, cmd_render, cmd_segtransfer, cmd_stability, cmd_viz,
};
pub use config::RunConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "b23d", version, about = "Multi-view feature back-projection and few-shot keypoint detection")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true, env = "B23D_THREADS")]
    pub threads: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a mesh and render it from the view rig.
    Render(RenderArgs),
    /// Lift per-view features onto mesh vertices.
    Backproject(BackprojectArgs),
    /// Detect keypoints on a target shape from annotated examples.
    Detect(DetectArgs),
    /// IoU-threshold curves of predictions against annotations.
    Eval(EvalArgs),
    /// Transfer part labels between shapes by feature similarity.
    Segtransfer(SegtransferArgs),
    /// Feature similarity under view-count, distance or rotation sweeps.
    Stability(StabilityArgs),
    /// Per-vertex PCA colours as an `x y z r g b` point file.
    Viz(VizArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RigFlags {
    #[arg(long)]
    pub n_slices: Option<u32>,
    #[arg(long)]
    pub distance: Option<f64>,
    /// Vertical field of view in degrees.
    #[arg(long)]
    pub fov_deg: Option<f64>,
    #[arg(long)]
    pub resolution: Option<u32>,
}

impl RigFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        let rig = &mut cfg.rig;
        rig.n_slices = self.n_slices.unwrap_or(rig.n_slices);
        rig.distance = self.distance.unwrap_or(rig.distance);
        rig.fov_deg = self.fov_deg.unwrap_or(rig.fov_deg);
        rig.resolution = self.resolution.unwrap_or(rig.resolution);
    }
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    pub mesh: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub rig: RigFlags,
}

#[derive(Debug, Clone, Args)]
pub struct BackprojectArgs {
    pub mesh: PathBuf,
    /// View manifest; without one the rig comes from the rig settings.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory of `<view>.b23d` maps for the file provider.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// file, synth-position, synth-normal or constant.
    #[arg(long)]
    pub provider: Option<String>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub no_reweight: bool,
    /// Output point-features file.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub rig: RigFlags,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OptimizerFlags {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct DetectArgs {
    /// Target shape id.
    #[arg(long)]
    pub target: String,
    /// Target mesh, when the target is not in the annotation file.
    #[arg(long)]
    pub target_mesh: Option<PathBuf>,
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub mesh_root: Option<PathBuf>,
    /// Directory of `<shape>.pf` point features.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// optimize, knn or fps.
    #[arg(long)]
    pub method: Option<String>,
    /// Number of few-shot shapes (0: all others of the class).
    #[arg(long)]
    pub shots: Option<usize>,
    /// Explicit few-shot shape ids.
    #[arg(long, value_delimiter = ',')]
    pub shot_ids: Option<Vec<String>>,
    /// Use only the few-shot shape whose class token is nearest the target's.
    #[arg(long)]
    pub retrieval: bool,
    #[arg(long)]
    pub candidates: Option<usize>,
    #[command(flatten)]
    pub optimizer: OptimizerFlags,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Prediction file or directory of prediction files.
    pub predictions: PathBuf,
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub mesh_root: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SegtransferArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub source_labels: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Ground truth for scoring; without it only labels are written.
    #[arg(long)]
    pub target_labels: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    pub mesh: PathBuf,
    /// views, distance or rotation.
    #[arg(long)]
    pub axis: String,
    /// Sweep values (slice counts, distances or degrees).
    #[arg(long, value_delimiter = ',')]
    pub sweep: Option<Vec<f64>>,
    /// synth-position or synth-normal.
    #[arg(long)]
    pub provider: Option<String>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub no_reweight: bool,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub rig: RigFlags,
}

#[derive(Debug, Clone, Args)]
pub struct VizArgs {
    pub mesh: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Load the configuration and run one command; returns its summary line.
pub fn run(cli: &Cli) -> CliResult<String> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Render(a) => cmd_render(a, cfg),
        Command::Backproject(a) => cmd_backproject(a, cfg),
        Command::Detect(a) => cmd_detect(a, cfg),
        Command::Eval(a) => cmd_eval(a, cfg),
        Command::Segtransfer(a) => cmd_segtransfer(a, cfg),
        Command::Stability(a) => cmd_stability(a, cfg),
        Command::Viz(a) => cmd_viz(a, cfg),
    }
}
