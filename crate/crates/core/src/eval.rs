//! Trajectory evaluation: KITTI segment drift and first-pose-aligned RMSE.

use std::fmt;

use thiserror::Error;

use crate::dq::RigidTransform;
use crate::io::StampedPose;

/// Segment lengths of the KITTI odometry metric, meters.
pub const SEGMENT_LENGTHS: [f64; 8] = [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0];
/// Segments start every this many frames.
pub const SEGMENT_STEP: usize = 10;
/// Largest timestamp difference accepted when pairing poses by time.
pub const MAX_TIME_OFFSET: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no pose of {estimated} estimated and {reference} reference poses could be associated")]
    NoAssociation { estimated: usize, reference: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Association {
    ByIndex,
    ByTimestamp,
}

/// `None` metrics mean the path is shorter than every segment length.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// Mean translation drift, percent of segment length.
    pub ate_pct: Option<f64>,
    /// Mean rotation drift, degrees per 100 m.
    pub are_deg_per_100m: Option<f64>,
    pub rmse_m: f64,
    pub segments: usize,
    pub pairs: usize,
    pub association: Association,
}

impl EvalResult {
    /// `ate_pct=… are_deg_per_100m=… rmse_m=…`; absent metrics print `na`.
    pub fn machine_line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "na".to_string(), |x| format!("{x:.6}"));
        format!(
            "ate_pct={} are_deg_per_100m={} rmse_m={:.6}",
            opt(self.ate_pct),
            opt(self.are_deg_per_100m),
            self.rmse_m
        )
    }
}

impl fmt::Display for EvalResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>, unit: &str| v.map_or_else(|| "n/a (path too short)".to_string(), |x| format!("{x:.4} {unit}"));
        let how = match self.association {
            Association::ByIndex => "index",
            Association::ByTimestamp => "timestamp",
        };
        writeln!(f, "{:<26}{}", "pose pairs", format!("{} (by {how})", self.pairs))?;
        writeln!(f, "{:<26}{}", "segments", self.segments)?;
        writeln!(f, "{:<26}{}", "translation drift (ATE)", opt(self.ate_pct, "%"))?;
        writeln!(f, "{:<26}{}", "rotation drift (ARE)", opt(self.are_deg_per_100m, "deg/100m"))?;
        write!(f, "{:<26}{:.4} m", "RMSE (first-pose aligned)", self.rmse_m)
    }
}

/// Pairs estimated and reference poses. Equal lengths pair by index;
/// otherwise each estimated pose takes the reference pose with the nearest
/// timestamp if it is within [`MAX_TIME_OFFSET`].
pub fn associate(estimated: &[StampedPose], reference: &[StampedPose]) -> Result<(Vec<(RigidTransform, RigidTransform)>, Association), EvalError> {
    let none = || EvalError::NoAssociation {
        estimated: estimated.len(),
        reference: reference.len(),
    };
    if estimated.is_empty() || reference.is_empty() {
        return Err(none());
    }
    if estimated.len() == reference.len() {
        let pairs = estimated.iter().zip(reference).map(|(e, r)| (e.pose.to_rigid(), r.pose.to_rigid())).collect();
        return Ok((pairs, Association::ByIndex));
    }
    let mut sorted: Vec<&StampedPose> = reference.iter().collect();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut pairs = Vec::new();
    for e in estimated {
        let at = sorted.partition_point(|r| r.time < e.time);
        let nearest = [at.checked_sub(1), Some(at)]
            .into_iter()
            .flatten()
            .filter_map(|i| sorted.get(i))
            .min_by(|a, b| (a.time - e.time).abs().total_cmp(&(b.time - e.time).abs()));
        if let Some(r) = nearest.filter(|r| (r.time - e.time).abs() <= MAX_TIME_OFFSET) {
            pairs.push((e.pose.to_rigid(), r.pose.to_rigid()));
        }
    }
    if pairs.is_empty() {
        return Err(none());
    }
    Ok((pairs, Association::ByTimestamp))
}

/// Cumulative path length along the reference poses.
fn path_distances(reference: &[RigidTransform]) -> Vec<f64> {
    let mut d = vec![0.0; reference.len()];
    for i in 1..reference.len() {
        d[i] = d[i - 1] + (reference[i].translation - reference[i - 1].translation).norm();
    }
    d
}

/// Per-segment `(translation error / length, rotation error rad / length)`.
pub fn segment_errors(estimated: &[RigidTransform], reference: &[RigidTransform]) -> Vec<(f64, f64)> {
    let dist = path_distances(reference);
    let mut out = Vec::new();
    for first in (0..reference.len()).step_by(SEGMENT_STEP) {
        for len in SEGMENT_LENGTHS {
            let Some(last) = (first..reference.len()).find(|&i| dist[i] > dist[first] + len) else {
                continue;
            };
            let gt = reference[first].inverse().compose(&reference[last]);
            let est = estimated[first].inverse().compose(&estimated[last]);
            let err = est.inverse().compose(&gt);
            out.push((err.translation.norm() / len, err.angle() / len));
        }
    }
    out
}

/// RMSE of positions after mapping the first estimated pose onto the first
/// reference pose.
pub fn aligned_rmse(estimated: &[RigidTransform], reference: &[RigidTransform]) -> f64 {
    if estimated.is_empty() {
        return 0.0;
    }
    let align = reference[0].compose(&estimated[0].inverse());
    let sum: f64 = estimated
        .iter()
        .zip(reference)
        .map(|(e, r)| (align.compose(e).translation - r.translation).norm_squared())
        .sum();
    (sum / estimated.len() as f64).sqrt()
}

pub fn evaluate(estimated: &[StampedPose], reference: &[StampedPose]) -> Result<EvalResult, EvalError> {
    let (pairs, association) = associate(estimated, reference)?;
    let (est, gt): (Vec<RigidTransform>, Vec<RigidTransform>) = pairs.into_iter().unzip();
    let segs = segment_errors(&est, &gt);
    let mean = |f: fn(&(f64, f64)) -> f64| (!segs.is_empty()).then(|| segs.iter().map(f).sum::<f64>() / segs.len() as f64);
    Ok(EvalResult {
        ate_pct: mean(|s| s.0).map(|t| 100.0 * t),
        are_deg_per_100m: mean(|s| s.1).map(|r| r.to_degrees() * 100.0),
        rmse_m: aligned_rmse(&est, &gt),
        segments: segs.len(),
        pairs: est.len(),
        association,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dq::Vec3;

    /// Straight drive along x at 1 m per pose with a slow yaw.
    fn drive(n: usize, stretch: f64) -> Vec<StampedPose> {
        let mut pose = RigidTransform::IDENTITY;
        let step = RigidTransform::from_axis_angle(&Vec3::z(), 0.002, Vec3::new(stretch, 0.0, 0.0));
        (0..n)
            .map(|k| {
                let p = StampedPose {
                    time: 0.1 * k as f64,
                    pose: pose.to_unit_dq(),
                };
                pose = pose.compose(&step);
                p
            })
            .collect()
    }

    #[test]
    fn identical_trajectories_score_zero() {
        let gt = drive(400, 1.0);
        let r = evaluate(&gt, &gt).unwrap();
        assert_eq!(r.ate_pct, Some(0.0));
        assert_eq!(r.are_deg_per_100m, Some(0.0));
        assert_eq!(r.rmse_m, 0.0);
        assert_eq!(r.machine_line(), "ate_pct=0.000000 are_deg_per_100m=0.000000 rmse_m=0.000000");
    }

    #[test]
    fn stretched_steps_read_as_one_percent() {
        let gt = drive(900, 1.0);
        let est = drive(900, 1.01);
        let ate = evaluate(&est, &gt).unwrap().ate_pct.unwrap();
        assert!((ate - 1.0).abs() < 0.05, "{ate}");
    }

    #[test]
    fn offset_after_first_pose_shows_in_rmse_only() {
        let gt = drive(300, 1.0);
        let shift = RigidTransform::from_translation(Vec3::new(1.0, 0.0, 0.0));
        let est: Vec<StampedPose> = gt
            .iter()
            .enumerate()
            .map(|(k, p)| StampedPose {
                pose: if k == 0 { p.pose } else { shift.compose(&p.pose.to_rigid()).to_unit_dq() },
                ..*p
            })
            .collect();
        let r = evaluate(&est, &gt).unwrap();
        assert!((r.rmse_m - (299.0f64 / 300.0).sqrt()).abs() < 1e-9);
        let rig = |t: &[StampedPose]| t[SEGMENT_STEP..].iter().map(|p| p.pose.to_rigid()).collect::<Vec<_>>();
        for (t, a) in segment_errors(&rig(&est), &rig(&gt)) {
            assert!(t < 1e-12 && a < 1e-12);
        }
    }

    #[test]
    fn short_paths_have_no_segments() {
        let gt = drive(50, 1.0);
        let r = evaluate(&gt, &gt).unwrap();
        assert_eq!(r.segments, 0);
        assert_eq!(r.ate_pct, None);
        assert!(r.machine_line().starts_with("ate_pct=na are_deg_per_100m=na"));
    }

    #[test]
    fn timestamps_pair_within_tolerance() {
        let gt = drive(30, 1.0);
        let est: Vec<StampedPose> = gt[..20]
            .iter()
            .map(|p| StampedPose {
                time: p.time + 0.02,
                ..*p
            })
            .collect();
        let r = evaluate(&est, &gt).unwrap();
        assert_eq!((r.pairs, r.association), (20, Association::ByTimestamp));
        let late: Vec<StampedPose> = est.iter().map(|p| StampedPose { time: p.time + 100.0, ..*p }).collect();
        assert!(matches!(evaluate(&late, &gt), Err(EvalError::NoAssociation { .. })));
    }
}
