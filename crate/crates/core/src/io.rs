//! Scan and trajectory file formats.
//!
//! Clouds: KITTI `.bin` (little-endian `f32` quadruples `x y z intensity`)
//! and ASCII `x y z` per line. Trajectories: KITTI poses (12 numbers, the
//! row-major 3×4 matrix) and TUM (`t x y z qx qy qz qw`). Numbers are
//! printed with 9 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::cloud::PointCloud;
use crate::dq::{Quaternion, RigidTransform, UnitDualQuaternion, Vec3};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message} (byte offset {offset})")]
    Binary { path: PathBuf, offset: usize, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

impl IoError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

pub fn read_to_string(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

pub fn write_string(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|e| IoError::io(path, e))
}

/// `v` with 9 significant digits, trailing zeros trimmed. Zero (and
/// negative zero) prints as `0`.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let mut s = format!("{v:.decimals$}");
        // rounding may carry into a new digit, e.g. 9.99999999995
        if s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len() > 9 && decimals > 0 {
            s = format!("{v:.prec$}", prec = decimals - 1);
        }
        if s.contains('.') {
            s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        }
        if s == "-0" {
            s = "0".to_string();
        }
        s
    } else {
        let s = format!("{v:.8e}");
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{e}")
    }
}

/// Little-endian `f32 x y z intensity` records; rows with a NaN are dropped.
pub fn parse_kitti_bin(bytes: &[u8], path: &Path) -> Result<PointCloud, IoError> {
    if bytes.len() % 16 != 0 {
        return Err(IoError::Binary {
            path: path.to_path_buf(),
            offset: bytes.len() - bytes.len() % 16,
            message: format!("size {} is not a multiple of 16 bytes", bytes.len()),
        });
    }
    let mut points = Vec::with_capacity(bytes.len() / 16);
    let mut intensity = Vec::with_capacity(bytes.len() / 16);
    for rec in bytes.chunks_exact(16) {
        let f = |i: usize| f32::from_le_bytes(rec[4 * i..4 * i + 4].try_into().expect("4 bytes"));
        let (x, y, z, w) = (f(0), f(1), f(2), f(3));
        if [x, y, z, w].iter().any(|v| v.is_nan()) {
            continue;
        }
        points.push(Vec3::new(x as f64, y as f64, z as f64));
        intensity.push(w);
    }
    Ok(PointCloud::with_attributes(points, Some(intensity), None))
}

pub fn read_kitti_bin(path: &Path) -> Result<PointCloud, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    parse_kitti_bin(&bytes, path)
}

pub fn encode_kitti_bin(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * 16);
    for (i, p) in cloud.points.iter().enumerate() {
        let w = cloud.intensity.as_ref().map_or(0.0, |v| v[i]);
        for v in [p.x as f32, p.y as f32, p.z as f32, w] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_kitti_bin(path: &Path, cloud: &PointCloud) -> Result<(), IoError> {
    fs::write(path, encode_kitti_bin(cloud)).map_err(|e| IoError::io(path, e))
}

/// `x y z [intensity [ring]]` per line; `#` starts a comment.
pub fn parse_ascii_cloud(text: &str, path: &Path) -> Result<PointCloud, IoError> {
    let mut points = Vec::new();
    let mut intensity = Vec::new();
    let mut ring = Vec::new();
    let mut columns = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| IoError::parse(path, n + 1, e.to_string()))?;
        if !(3..=5).contains(&vals.len()) {
            return Err(IoError::parse(path, n + 1, format!("expected 3 to 5 fields, found {}", vals.len())));
        }
        if *columns.get_or_insert(vals.len()) != vals.len() {
            return Err(IoError::parse(path, n + 1, "inconsistent column count"));
        }
        points.push(Vec3::new(vals[0], vals[1], vals[2]));
        if vals.len() >= 4 {
            intensity.push(vals[3] as f32);
        }
        if vals.len() == 5 {
            ring.push(vals[4] as u16);
        }
    }
    let c = columns.unwrap_or(3);
    Ok(PointCloud::with_attributes(
        points,
        (c >= 4).then_some(intensity),
        (c == 5).then_some(ring),
    ))
}

pub fn read_ascii_cloud(path: &Path) -> Result<PointCloud, IoError> {
    parse_ascii_cloud(&read_to_string(path)?, path)
}

/// Writes `x y z` (plus `intensity ring` when the cloud has a ring index).
pub fn format_ascii_cloud(cloud: &PointCloud) -> String {
    let mut s = String::with_capacity(cloud.len() * 32);
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(s, "{} {} {}", fmt_sig9(p.x), fmt_sig9(p.y), fmt_sig9(p.z));
        if let Some(ring) = &cloud.ring {
            let w = cloud.intensity.as_ref().map_or(0.0, |v| v[i]);
            let _ = write!(s, " {} {}", fmt_sig9(w as f64), ring[i]);
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryFormat {
    KittiPose,
    Tum,
}

/// A timestamped pose of the sensor frame in the global frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StampedPose {
    pub time: f64,
    pub pose: UnitDualQuaternion,
}

pub fn format_kitti_pose(pose: &UnitDualQuaternion) -> String {
    let rt = pose.to_rigid();
    let r = rt.rotation_matrix();
    let t = rt.translation;
    let mut vals = Vec::with_capacity(12);
    for i in 0..3 {
        vals.extend([r[(i, 0)], r[(i, 1)], r[(i, 2)], t[i]]);
    }
    vals.iter().map(|v| fmt_sig9(*v)).collect::<Vec<_>>().join(" ")
}

pub fn format_tum_pose(time: f64, pose: &UnitDualQuaternion) -> String {
    let rt = pose.to_rigid();
    let (t, q) = (rt.translation, rt.rotation);
    [time, t.x, t.y, t.z, q.x, q.y, q.z, q.w]
        .iter()
        .map(|v| fmt_sig9(*v))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn format_trajectory(poses: &[StampedPose], format: TrajectoryFormat) -> String {
    let mut s = String::new();
    for p in poses {
        s.push_str(&match format {
            TrajectoryFormat::KittiPose => format_kitti_pose(&p.pose),
            TrajectoryFormat::Tum => format_tum_pose(p.time, &p.pose),
        });
        s.push('\n');
    }
    s
}

pub fn write_trajectory(path: &Path, poses: &[StampedPose], format: TrajectoryFormat) -> Result<(), IoError> {
    write_string(path, &format_trajectory(poses, format))
}

/// KITTI lines carry no timestamps; the line index is used instead.
pub fn parse_trajectory(text: &str, format: TrajectoryFormat, path: &Path) -> Result<Vec<StampedPose>, IoError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| IoError::parse(path, n + 1, e.to_string()))?;
        let want = match format {
            TrajectoryFormat::KittiPose => 12,
            TrajectoryFormat::Tum => 8,
        };
        if vals.len() != want {
            return Err(IoError::parse(path, n + 1, format!("expected {want} fields, found {}", vals.len())));
        }
        let (time, rt) = match format {
            TrajectoryFormat::KittiPose => {
                let m = nalgebra::Matrix3::new(
                    vals[0], vals[1], vals[2], vals[4], vals[5], vals[6], vals[8], vals[9], vals[10],
                );
                let t = Vec3::new(vals[3], vals[7], vals[11]);
                (out.len() as f64, RigidTransform::from_matrix(&m, t))
            }
            TrajectoryFormat::Tum => {
                let q = Quaternion::new(vals[7], vals[4], vals[5], vals[6]);
                if q.norm() < 1e-6 || !q.is_finite() {
                    return Err(IoError::parse(path, n + 1, "rotation quaternion has zero norm"));
                }
                (vals[0], RigidTransform::new(q, Vec3::new(vals[1], vals[2], vals[3])))
            }
        };
        out.push(StampedPose {
            time,
            pose: rt.to_unit_dq(),
        });
    }
    Ok(out)
}

pub fn read_trajectory(path: &Path, format: TrajectoryFormat) -> Result<Vec<StampedPose>, IoError> {
    parse_trajectory(&read_to_string(path)?, format, path)
}

/// Guesses the trajectory format from the field count of the first data line.
pub fn sniff_trajectory_format(text: &str) -> Option<TrajectoryFormat> {
    let line = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .find(|l| !l.is_empty())?;
    match line.split_whitespace().count() {
        12 => Some(TrajectoryFormat::KittiPose),
        8 => Some(TrajectoryFormat::Tum),
        _ => None,
    }
}
