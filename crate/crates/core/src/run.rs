//! Whole-sequence runs: scan sources, the odometry loop and its output files.
//!
//! A run directory holds `trajectory_kitti.txt`, `trajectory_tum.txt`,
//! `timing.csv` and, when maps are exported, `dense_map.xyz` (`x y z` lines)
//! and `std_map.txt` (24 numbers per line). A synthetic sequence directory
//! holds `velodyne/NNNNNN.bin`, `times.txt` and the ground truth in both
//! trajectory formats.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::cloud::PointCloud;
use crate::io::{self, IoError, StampedPose, TrajectoryFormat};
use crate::pipeline::{Odometry, PipelineConfig, PipelineError, ScanStatus};
use crate::synth::{SceneError, SyntheticScene, SyntheticScan};

pub const TRAJECTORY_KITTI: &str = "trajectory_kitti.txt";
pub const TRAJECTORY_TUM: &str = "trajectory_tum.txt";
pub const TIMING_CSV: &str = "timing.csv";
pub const DENSE_MAP: &str = "dense_map.xyz";
pub const STD_MAP: &str = "std_map.txt";
pub const TIMES: &str = "times.txt";
pub const GROUND_TRUTH_KITTI: &str = "groundtruth_kitti.txt";
pub const GROUND_TRUTH_TUM: &str = "groundtruth_tum.txt";
pub const SCAN_DIR: &str = "velodyne";

/// Scan spacing assumed when no `times.txt` is found.
pub const DEFAULT_SCAN_PERIOD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    KittiBin,
    AsciiXyz,
    Synthetic,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "kitti-bin" => Ok(InputFormat::KittiBin),
            "ascii-xyz" => Ok(InputFormat::AsciiXyz),
            "synthetic" => Ok(InputFormat::Synthetic),
            _ => Err(format!("unknown format {s:?} (expected kitti-bin, ascii-xyz or synthetic)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot read input: {0}")]
    Input(IoError),
    #[error("{path}: {message}")]
    NoScans { path: PathBuf, message: String },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("scan {scan}: {source}")]
    Scan {
        scan: usize,
        #[source]
        source: IoError,
    },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("cannot write output: {0}")]
    Output(IoError),
}

/// Scans in time order, loaded on demand.
pub enum ScanSource {
    Files { paths: Vec<PathBuf>, times: Vec<f64>, format: InputFormat },
    Synthetic(Vec<(SyntheticScan, StampedPose)>),
}

impl ScanSource {
    /// Opens a file or a directory of scan files (sorted by name), or
    /// generates a synthetic scene. `seed` replaces the scene's noise seed.
    pub fn open(input: &Path, format: InputFormat, seed: Option<u64>) -> Result<Self, RunError> {
        match format {
            InputFormat::Synthetic => {
                let text = io::read_to_string(input).map_err(RunError::Input)?;
                let mut scene = SyntheticScene::parse(&text)?;
                if let Some(s) = seed {
                    scene.seed = s;
                }
                Ok(ScanSource::Synthetic(scene.generate()?))
            }
            _ => {
                let meta = fs::metadata(input).map_err(|e| RunError::Input(IoError::io(input, e)))?;
                let paths = if meta.is_dir() {
                    list_scans(input, format)?
                } else {
                    vec![input.to_path_buf()]
                };
                if paths.is_empty() {
                    return Err(RunError::NoScans {
                        path: input.to_path_buf(),
                        message: "no scan files found".into(),
                    });
                }
                let dir = if meta.is_dir() { input } else { input.parent().unwrap_or(Path::new(".")) };
                let times = find_times(dir, paths.len())?;
                Ok(ScanSource::Files { paths, times, format })
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ScanSource::Files { paths, .. } => paths.len(),
            ScanSource::Synthetic(scans) => scans.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn load(&self, k: usize) -> Result<(f64, PointCloud), RunError> {
        match self {
            ScanSource::Files { paths, times, format } => {
                let path = &paths[k];
                let cloud = match format {
                    InputFormat::KittiBin => io::read_kitti_bin(path),
                    _ => io::read_ascii_cloud(path),
                }
                .map_err(|source| RunError::Scan { scan: k, source })?;
                Ok((times[k], cloud))
            }
            ScanSource::Synthetic(scans) => Ok((scans[k].1.time, scans[k].0.cloud.clone())),
        }
    }
}

fn list_scans(dir: &Path, format: InputFormat) -> Result<Vec<PathBuf>, RunError> {
    let exts: &[&str] = match format {
        InputFormat::KittiBin => &["bin"],
        _ => &["xyz", "txt", "asc"],
    };
    let entries = fs::read_dir(dir).map_err(|e| RunError::Input(IoError::io(dir, e)))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| RunError::Input(IoError::io(dir, e)))?.path();
        let ext_ok = path.extension().and_then(|e| e.to_str()).is_some_and(|e| exts.contains(&e));
        if path.is_file() && ext_ok && path.file_name() != Some(TIMES.as_ref()) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// `times.txt` next to the scans or one level up (the KITTI layout), else a
/// fixed period.
fn find_times(dir: &Path, n: usize) -> Result<Vec<f64>, RunError> {
    for cand in [dir.join(TIMES), dir.parent().map(|p| p.join(TIMES)).unwrap_or_default()] {
        if !cand.is_file() {
            continue;
        }
        let text = io::read_to_string(&cand).map_err(RunError::Input)?;
        let times = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| l.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| RunError::NoScans {
                path: cand.clone(),
                message: format!("bad timestamp: {e}"),
            })?;
        if times.len() < n {
            return Err(RunError::NoScans {
                path: cand,
                message: format!("{} timestamps for {n} scans", times.len()),
            });
        }
        return Ok(times[..n].to_vec());
    }
    Ok((0..n).map(|k| DEFAULT_SCAN_PERIOD * k as f64).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub scans: usize,
    pub coasted: usize,
    pub elapsed: Duration,
}

/// Runs odometry over `source` and writes the run files into `output`.
/// On a fatal scan error the files written so far cover the processed scans.
pub fn run_sequence(source: &ScanSource, cfg: PipelineConfig, output: &Path, export_maps: bool) -> Result<RunSummary, RunError> {
    fs::create_dir_all(output).map_err(|e| RunError::Output(IoError::io(output, e)))?;
    let start = Instant::now();
    let mut odo = Odometry::new(cfg);
    let mut coasted = 0;
    for k in 0..source.len() {
        let step = source.load(k).and_then(|(time, cloud)| Ok(odo.process_scan(&cloud, time)?));
        match step {
            Ok(r) => {
                if matches!(r.status, ScanStatus::Coasted(_)) {
                    coasted += 1;
                }
                log::debug!(
                    "scan {k}: {} edges, {} surfaces, {} descriptors, {:?}, {:.1} ms",
                    r.edges,
                    r.surfaces,
                    r.descriptors,
                    r.status,
                    r.timings.total.as_secs_f64() * 1e3
                );
            }
            Err(e) => {
                write_outputs(&odo, output, export_maps)?;
                return Err(e);
            }
        }
    }
    write_outputs(&odo, output, export_maps)?;
    Ok(RunSummary {
        scans: odo.trajectory().len(),
        coasted,
        elapsed: start.elapsed(),
    })
}

fn write_outputs(odo: &Odometry, output: &Path, export_maps: bool) -> Result<(), RunError> {
    let out = |name: &str, text: &str| io::write_string(&output.join(name), text).map_err(RunError::Output);
    let traj = odo.trajectory();
    out(TRAJECTORY_KITTI, &io::format_trajectory(traj, TrajectoryFormat::KittiPose))?;
    out(TRAJECTORY_TUM, &io::format_trajectory(traj, TrajectoryFormat::Tum))?;
    out(TIMING_CSV, &odo.timing_csv())?;
    if export_maps {
        out(DENSE_MAP, &odo.maps().dense.export())?;
        out(STD_MAP, &odo.maps().export_std_map())?;
    }
    Ok(())
}

/// Writes a synthetic scene as a KITTI-style sequence. Ground truth is
/// relative to the first pose, like the KITTI pose files.
pub fn write_synthetic_sequence(scene: &SyntheticScene, output: &Path) -> Result<usize, RunError> {
    let scans = scene.generate()?;
    let scan_dir = output.join(SCAN_DIR);
    fs::create_dir_all(&scan_dir).map_err(|e| RunError::Output(IoError::io(&scan_dir, e)))?;
    let origin = scans[0].1.pose.inverse();
    let mut times = String::new();
    let mut gt = Vec::with_capacity(scans.len());
    for (k, (scan, sp)) in scans.iter().enumerate() {
        io::write_kitti_bin(&scan_dir.join(format!("{k:06}.bin")), &scan.cloud).map_err(RunError::Output)?;
        times.push_str(&io::fmt_sig9(sp.time));
        times.push('\n');
        gt.push(StampedPose {
            time: sp.time,
            pose: (origin * sp.pose).canonical(),
        });
    }
    let out = |name: &str, text: &str| io::write_string(&output.join(name), text).map_err(RunError::Output);
    out(TIMES, &times)?;
    out(GROUND_TRUTH_KITTI, &io::format_trajectory(&gt, TrajectoryFormat::KittiPose))?;
    out(GROUND_TRUTH_TUM, &io::format_trajectory(&gt, TrajectoryFormat::Tum))?;
    Ok(scans.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::box_room_scene;

    #[test]
    fn format_names() {
        assert_eq!("kitti-bin".parse(), Ok(InputFormat::KittiBin));
        assert_eq!("ascii-xyz".parse(), Ok(InputFormat::AsciiXyz));
        assert!("pcd".parse::<InputFormat>().is_err());
    }

    #[test]
    fn synthetic_sequence_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let scene = box_room_scene(3, 0.0, 0);
        assert_eq!(write_synthetic_sequence(&scene, dir.path()).unwrap(), 3);
        let src = ScanSource::open(&dir.path().join(SCAN_DIR), InputFormat::KittiBin, None).unwrap();
        assert_eq!(src.len(), 3);
        let (t, cloud) = src.load(2).unwrap();
        assert_eq!(t, 0.2);
        assert!(!cloud.is_empty());
        let gt = io::read_trajectory(&dir.path().join(GROUND_TRUTH_TUM), TrajectoryFormat::Tum).unwrap();
        assert!(gt[0].pose.distance_mod_sign(&crate::UnitDualQuaternion::IDENTITY) < 1e-12);
    }
}
