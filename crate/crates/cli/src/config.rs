//! Run configuration: a TOML file whose sections mirror the command flags.

use std::path::{Path, PathBuf};

use b23d_core::evaluation::default_thresholds;
use b23d_core::features::DEFAULT_SIGMA;
use b23d_core::keypoints::OptimizerConfig;
use b23d_core::views::{Intrinsics, DEFAULT_DISTANCE, DEFAULT_RESOLUTION};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// File name of the effective-config echo written next to every output.
pub const ECHO_FILE: &str = "effective_config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RigConfig {
    pub n_slices: u32,
    pub distance: f64,
    pub fov_deg: f64,
    pub resolution: u32,
}

impl Default for RigConfig {
    fn default() -> Self {
        Self {
            n_slices: 5,
            distance: DEFAULT_DISTANCE,
            fov_deg: 60.0,
            resolution: DEFAULT_RESOLUTION,
        }
    }
}

impl RigConfig {
    pub fn intrinsics(&self) -> CliResult<Intrinsics> {
        Intrinsics::new(self.resolution, self.resolution, self.fov_deg.to_radians()).map_err(CliError::from)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesConfig {
    /// `file`, `synth-position`, `synth-normal` or `constant`.
    pub provider: String,
    pub sigma: f64,
    pub reweight: bool,
    /// Patch grid of the synthetic providers.
    pub grid: u32,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        Self {
            provider: "file".into(),
            sigma: DEFAULT_SIGMA,
            reweight: true,
            grid: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectConfig {
    /// `optimize`, `knn` or `fps`.
    pub method: String,
    pub candidates: usize,
    /// Few-shot shapes to use; 0 takes every other annotated shape of the class.
    pub shots: usize,
    pub retrieval: bool,
    /// Farthest-point samples added when normalizing keypoint geodesics.
    pub geodesic_samples: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            method: "optimize".into(),
            candidates: 2048,
            shots: 0,
            retrieval: false,
            geodesic_samples: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub thresholds: Vec<f64>,
    pub k_neighbors: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            thresholds: default_thresholds(),
            k_neighbors: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub annotations: Option<PathBuf>,
    pub mesh_root: Option<PathBuf>,
    /// Directory of per-view maps (`<view>.b23d`) or per-shape point
    /// features (`<shape>.pf`), depending on the command.
    pub features_dir: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub rig: RigConfig,
    pub features: FeaturesConfig,
    pub optimizer: OptimizerConfig,
    pub detect: DetectConfig,
    pub eval: EvalConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Input(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.optimizer.validate()?;
        if !(self.features.sigma > 0.0 && self.features.sigma.is_finite()) {
            return Err(CliError::Input(format!("sigma must be positive, got {}", self.features.sigma)));
        }
        if self.features.grid == 0 {
            return Err(CliError::Input("grid must be positive".into()));
        }
        if self.eval.thresholds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Input("thresholds must be strictly increasing".into()));
        }
        if self.eval.k_neighbors == 0 {
            return Err(CliError::Input("k_neighbors must be at least 1".into()));
        }
        if self.detect.candidates == 0 {
            return Err(CliError::Input("candidates must be at least 1".into()));
        }
        self.rig.intrinsics()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Write the effective configuration into `dir`.
    pub fn echo(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(ECHO_FILE);
        std::fs::write(&path, self.to_toml()).map_err(|e| CliError::write(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(RunConfig::parse("").unwrap(), cfg);
    }

    #[test]
    fn partial_sections_fill_defaults() {
        let cfg = RunConfig::parse("[optimizer]\nseed = 7\n[rig]\nn_slices = 2\n").unwrap();
        assert_eq!(cfg.optimizer.seed, 7);
        assert_eq!(cfg.optimizer.steps, 5000);
        assert_eq!(cfg.rig.n_slices, 2);
        assert_eq!(cfg.rig.distance, DEFAULT_DISTANCE);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["[rig]\nslices = 3\n", "[unknown]\n", "[optimizer]\nmomentum = 0.9\n"] {
            let err = RunConfig::parse(text).unwrap_err();
            assert_eq!(err.exit_code(), 4, "{text}");
        }
        assert!(RunConfig::parse("[features]\nsigma = -1.0\n").is_err());
        assert!(RunConfig::parse("[eval]\nthresholds = [0.1, 0.05]\n").is_err());
    }
}
