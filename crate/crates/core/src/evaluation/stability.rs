//! Sweeps of feature similarity against a reference rig configuration.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, Vector3};

use super::{format_float, EvalError};
use crate::features::{lift_features, FeatureProvider, LiftOptions, PointFeatureSet};
use crate::geometry::TriangleMesh;
use crate::views::{sample_viewpoints, Intrinsics, DEFAULT_DISTANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityAxis {
    /// Sweep values are slice counts; the reference is `base.n_slices`.
    Views,
    /// Sweep values are camera distances; the reference is the smallest.
    Distance,
    /// Sweep values are up-axis rotations in degrees; the reference is 0.
    Rotation,
}

impl StabilityAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Views => "views",
            Self::Distance => "distance",
            Self::Rotation => "rotation",
        }
    }
}

impl fmt::Display for StabilityAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StabilityAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::Views, Self::Distance, Self::Rotation]
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown stability axis `{s}`"))
    }
}

/// Rig and lifting settings shared by every sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityBase {
    pub n_slices: u32,
    pub distance: f64,
    pub intrinsics: Intrinsics,
    pub lift: LiftOptions,
}

impl Default for StabilityBase {
    fn default() -> Self {
        Self {
            n_slices: 5,
            distance: DEFAULT_DISTANCE,
            intrinsics: Intrinsics::default(),
            lift: LiftOptions::default(),
        }
    }
}

/// Mean cosine similarity and the mean ± one standard deviation band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRow {
    pub value: f64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Per-point cosine similarity, summarized as (mean, population std).
/// A zero feature row scores 0.
pub fn mean_cosine_similarity(a: &PointFeatureSet, b: &PointFeatureSet) -> Result<(f64, f64), EvalError> {
    if a.dim() != b.dim() || a.len() != b.len() {
        return Err(EvalError::DimensionMismatch {
            expected: a.dim() * a.len(),
            found: b.dim() * b.len(),
        });
    }
    if a.is_empty() {
        return Err(EvalError::EmptySource);
    }
    let sims: Vec<f64> = (0..a.len()).map(|i| cosine(a.row(i), b.row(i))).collect();
    let n = sims.len() as f64;
    let mean = sims.iter().sum::<f64>() / n;
    let var = sims.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// For each sweep value, lift features under the swept configuration and
/// compare them point-by-point with the reference configuration.
///
/// `provider` receives the object-frame matrix (the inverse of the applied
/// mesh rotation; identity off the rotation axis), so synthetic providers
/// can report features in the unrotated frame.
pub fn stability_report(
    mesh: &TriangleMesh,
    provider: &dyn Fn(&Matrix3<f64>) -> Box<dyn FeatureProvider>,
    axis: StabilityAxis,
    sweep: &[f64],
    base: &StabilityBase,
) -> Result<Vec<StabilityRow>, EvalError> {
    if sweep.is_empty() || sweep.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::Sweep("sweep values must be finite and non-empty".into()));
    }
    if axis == StabilityAxis::Views && sweep.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
        return Err(EvalError::Sweep("view sweep values must be non-negative integers".into()));
    }
    let lift = |n_slices: u32, distance: f64, degrees: f64| -> Result<PointFeatureSet, EvalError> {
        let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), degrees.to_radians());
        let rotated;
        let target = if degrees == 0.0 {
            mesh
        } else {
            rotated = mesh.transformed(rot.matrix(), &Vector3::zeros());
            &rotated
        };
        let rig = sample_viewpoints(n_slices, distance, base.intrinsics)?;
        let p = provider(&rot.inverse().into_inner());
        Ok(lift_features(target, &rig, p.as_ref(), base.lift)?.features)
    };
    let reference = match axis {
        StabilityAxis::Views | StabilityAxis::Rotation => lift(base.n_slices, base.distance, 0.0)?,
        StabilityAxis::Distance => lift(base.n_slices, sweep.iter().copied().fold(f64::INFINITY, f64::min), 0.0)?,
    };
    sweep
        .iter()
        .map(|&value| {
            let feats = match axis {
                StabilityAxis::Views => lift(value as u32, base.distance, 0.0)?,
                StabilityAxis::Distance => lift(base.n_slices, value, 0.0)?,
                StabilityAxis::Rotation => lift(base.n_slices, base.distance, value)?,
            };
            let (mean, std) = mean_cosine_similarity(&feats, &reference)?;
            log::info!("{axis} {value}: mean similarity {mean:.6}");
            Ok(StabilityRow {
                value,
                mean,
                lo: mean - std,
                hi: mean + std,
            })
        })
        .collect()
}

/// CSV with header `value,mean,lo,hi`.
pub fn write_stability_csv(rows: &[StabilityRow], out: impl Write) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value", "mean", "lo", "hi"])?;
    for r in rows {
        w.write_record([r.value, r.mean, r.lo, r.hi].map(format_float))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SynthPositionProvider;
    use crate::geometry::primitives;

    fn setup() -> (TriangleMesh, StabilityBase) {
        let mesh = primitives::icosphere(2, 1.0).normalize().unwrap().0;
        let base = StabilityBase {
            n_slices: 2,
            intrinsics: Intrinsics::new(64, 64, std::f64::consts::FRAC_PI_3).unwrap(),
            ..Default::default()
        };
        (mesh, base)
    }

    fn synth(frame: &Matrix3<f64>) -> Box<dyn FeatureProvider> {
        Box::new(SynthPositionProvider::new(8, 8).with_frame(*frame))
    }

    #[test]
    fn reference_points_score_one() {
        let (mesh, base) = setup();
        let rows = stability_report(&mesh, &synth, StabilityAxis::Rotation, &[0.0], &base).unwrap();
        assert_eq!(rows[0].mean, 1.0);
        assert!(rows[0].hi - rows[0].lo < 1e-12);
        let rows = stability_report(&mesh, &synth, StabilityAxis::Views, &[2.0, 1.0], &base).unwrap();
        assert_eq!(rows[0].mean, 1.0);
        assert!(rows[1].mean < 1.0);
    }

    #[test]
    fn csv_and_errors() {
        let rows = [StabilityRow { value: 0.5, mean: 0.75, lo: 0.5, hi: 1.0 }];
        let mut buf = Vec::new();
        write_stability_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "value,mean,lo,hi\n0.5,0.75,0.5,1\n");
        let (mesh, base) = setup();
        assert!(stability_report(&mesh, &synth, StabilityAxis::Views, &[1.5], &base).is_err());
        assert!(stability_report(&mesh, &synth, StabilityAxis::Distance, &[], &base).is_err());
        assert_eq!("distance".parse::<StabilityAxis>().unwrap(), StabilityAxis::Distance);
    }
}
