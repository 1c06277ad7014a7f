//! Per-scan odometry: features, prediction, matching, solve, map update.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::cloud::{voxel_downsample_indices, PointCloud};
use crate::descriptor::{extract_descriptors, DescriptorConfig};
use crate::dq::UnitDualQuaternion;
use crate::features::{extract_edges_surfaces, project_to_sri, FeatureCloud, FeatureConfig, FeatureError};
use crate::io::{fmt_sig9, StampedPose};
use crate::manifold::{dq_exp, dq_log};
use crate::map::{LocalMaps, MapConfig, MapError};
use crate::residuals::RobustLoss;
use crate::solver::{solve, SolverConfig, SolverReport};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub features: FeatureConfig,
    pub descriptor: DescriptorConfig,
    pub map: MapConfig,
    pub solver: SolverConfig,
    /// Voxel size for thinning the scan's surface points before matching.
    /// 0 keeps all.
    pub surface_voxel: f64,
    /// Matching and solving rounds per scan.
    pub outer_iterations: usize,
    /// Stop the rounds once the pose moves less than this (m and rad).
    pub outer_tolerance: f64,
    /// Match gate of the first round. It halves every round until it
    /// reaches `map.match_gate`.
    pub initial_match_gate: f64,
    /// Predict with the last relative motion instead of holding the pose.
    pub constant_velocity: bool,
    /// The second scan, which has no motion prior, is also registered from
    /// pose hypotheses voted by descriptor matches; the start that ends with
    /// the most feature matches wins.
    pub coarse_init: bool,
    pub coarse_hypotheses: usize,
    /// Record wall-clock stage times. When off, the timing columns are 0.
    pub stage_timing: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            descriptor: DescriptorConfig::default(),
            map: MapConfig::default(),
            solver: SolverConfig::default(),
            surface_voxel: 0.3,
            outer_iterations: 6,
            outer_tolerance: 1e-6,
            initial_match_gate: 0.4,
            constant_velocity: true,
            coarse_init: true,
            coarse_hypotheses: 8,
            stage_timing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value {value:?} for {key}: {reason}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
}

fn parse_num<T: std::str::FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| e.to_string())
}

fn parse_positive(v: &str) -> Result<f64, String> {
    let x: f64 = parse_num(v)?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err("must be positive".into())
    }
}

fn parse_non_negative(v: &str) -> Result<f64, String> {
    let x: f64 = parse_num(v)?;
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err("must be non-negative".into())
    }
}

fn parse_count(v: &str) -> Result<usize, String> {
    let n: usize = parse_num(v)?;
    if n == 0 {
        return Err("must be at least 1".into());
    }
    Ok(n)
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

fn parse_loss(v: &str) -> Result<RobustLoss, String> {
    if v == "none" {
        return Ok(RobustLoss::Trivial);
    }
    parse_positive(v).map(RobustLoss::Huber)
}

impl PipelineConfig {
    /// Every key with its current value, one `key = value` per line.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let f = |v: f64| fmt_sig9(v);
        let (fe, de, m, s) = (&self.features, &self.descriptor, &self.map, &self.solver);
        vec![
            ("sri_rows", fe.sri.rows.to_string()),
            ("sri_cols", fe.sri.cols.to_string()),
            ("fov_up_deg", f(fe.sri.fov_up_deg)),
            ("fov_down_deg", f(fe.sri.fov_down_deg)),
            ("edge_threshold", f(fe.edge_threshold)),
            ("surface_threshold", f(fe.surface_threshold)),
            ("edge_segments", fe.edge_segments.to_string()),
            ("max_edges_per_segment", fe.max_edges_per_segment.to_string()),
            ("min_valid_neighbors", fe.min_valid_neighbors.to_string()),
            ("ramp_flatness", f(fe.ramp_flatness)),
            ("plane_voxel", f(de.voxel_size)),
            ("plane_min_points", de.min_points.to_string()),
            ("planarity_threshold", f(de.planarity_threshold)),
            ("attach_distance", f(de.attach_distance)),
            ("normal_merge_angle_deg", f(de.normal_merge_angle_deg)),
            ("cluster_radius", f(de.cluster_radius)),
            ("coplanar_tolerance", f(de.coplanar_tolerance)),
            ("max_vertex_extent", f(de.max_vertex_extent)),
            ("max_vertices", de.max_vertices.to_string()),
            ("min_side", f(de.min_side)),
            ("max_side", f(de.max_side)),
            ("min_area", f(de.min_area)),
            ("map_window", f(m.map_window)),
            ("feature_voxel", f(m.feature_voxel)),
            ("max_neighbor_distance", f(m.max_neighbor_distance)),
            ("match_gate", f(m.match_gate)),
            ("k_neighbors", m.fit.k_neighbors.to_string()),
            ("line_eig_ratio", f(m.fit.line_eig_ratio)),
            ("plane_inlier", f(m.fit.plane_inlier)),
            ("plane_eig_ratio", f(m.fit.plane_eig_ratio)),
            ("std_window", m.std_window.to_string()),
            ("max_descriptors", m.max_descriptors.to_string()),
            ("merge_radius", f(m.merge_radius)),
            ("std_side_threshold", f(m.std_side_threshold)),
            ("std_centroid_threshold", f(m.std_centroid_threshold)),
            ("coarse_inlier_distance", f(m.coarse_inlier_distance)),
            ("coarse_min_inliers", m.coarse_min_inliers.to_string()),
            ("kf_translation", f(m.kf_translation)),
            ("kf_rotation_deg", f(m.kf_rotation_deg)),
            ("dense_voxel", f(m.dense_voxel)),
            ("max_iterations", s.max_iterations.to_string()),
            ("function_tolerance", f(s.function_tolerance)),
            ("parameter_tolerance", f(s.parameter_tolerance)),
            ("initial_lambda", f(s.initial_lambda)),
            ("lambda_up", f(s.lambda_up)),
            ("lambda_down", f(s.lambda_down)),
            ("finite_difference_step", f(s.finite_difference_step)),
            ("min_correspondences", s.min_correspondences.to_string()),
            ("degeneracy_ratio", f(s.degeneracy_ratio)),
            (
                "huber_scale",
                match s.residual.feature_loss {
                    RobustLoss::Trivial => "none".into(),
                    RobustLoss::Huber(d) => f(d),
                },
            ),
            ("std_rotation_weight", f(s.residual.std_weights.rotation)),
            ("std_translation_weight", f(s.residual.std_weights.translation)),
            ("surface_voxel", f(self.surface_voxel)),
            ("outer_iterations", self.outer_iterations.to_string()),
            ("outer_tolerance", f(self.outer_tolerance)),
            ("initial_match_gate", f(self.initial_match_gate)),
            ("constant_velocity", self.constant_velocity.to_string()),
            ("coarse_init", self.coarse_init.to_string()),
            ("coarse_hypotheses", self.coarse_hypotheses.to_string()),
            ("stage_timing", self.stage_timing.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    fn set(&mut self, key: &str, v: &str) -> Option<Result<(), String>> {
        let (fe, de, m, s) = (&mut self.features, &mut self.descriptor, &mut self.map, &mut self.solver);
        let r = match key {
            "sri_rows" => parse_num(v).map(|x| fe.sri.rows = x),
            "sri_cols" => parse_num(v).map(|x| fe.sri.cols = x),
            "fov_up_deg" => parse_num(v).map(|x| fe.sri.fov_up_deg = x),
            "fov_down_deg" => parse_num(v).map(|x| fe.sri.fov_down_deg = x),
            "edge_threshold" => parse_positive(v).map(|x| fe.edge_threshold = x),
            "surface_threshold" => parse_positive(v).map(|x| fe.surface_threshold = x),
            "edge_segments" => parse_count(v).map(|x| fe.edge_segments = x),
            "max_edges_per_segment" => parse_num(v).map(|x| fe.max_edges_per_segment = x),
            "min_valid_neighbors" => parse_num(v).map(|x| fe.min_valid_neighbors = x),
            "ramp_flatness" => parse_non_negative(v).map(|x| fe.ramp_flatness = x),
            "plane_voxel" => parse_positive(v).map(|x| de.voxel_size = x),
            "plane_min_points" => parse_count(v).map(|x| de.min_points = x),
            "planarity_threshold" => parse_positive(v).map(|x| de.planarity_threshold = x),
            "attach_distance" => parse_non_negative(v).map(|x| de.attach_distance = x),
            "normal_merge_angle_deg" => parse_non_negative(v).map(|x| de.normal_merge_angle_deg = x),
            "cluster_radius" => parse_non_negative(v).map(|x| de.cluster_radius = x),
            "coplanar_tolerance" => parse_non_negative(v).map(|x| de.coplanar_tolerance = x),
            "max_vertex_extent" => parse_positive(v).map(|x| de.max_vertex_extent = x),
            "max_vertices" => parse_num(v).map(|x| de.max_vertices = x),
            "min_side" => parse_non_negative(v).map(|x| de.min_side = x),
            "max_side" => parse_positive(v).map(|x| de.max_side = x),
            "min_area" => parse_non_negative(v).map(|x| de.min_area = x),
            "map_window" => parse_positive(v).map(|x| m.map_window = x),
            "feature_voxel" => parse_non_negative(v).map(|x| m.feature_voxel = x),
            "max_neighbor_distance" => parse_positive(v).map(|x| m.max_neighbor_distance = x),
            "match_gate" => parse_non_negative(v).map(|x| m.match_gate = x),
            "k_neighbors" => parse_num(v).and_then(|x: usize| {
                if x < 3 {
                    Err("must be at least 3".into())
                } else {
                    m.fit.k_neighbors = x;
                    Ok(())
                }
            }),
            "line_eig_ratio" => parse_positive(v).map(|x| m.fit.line_eig_ratio = x),
            "plane_inlier" => parse_positive(v).map(|x| m.fit.plane_inlier = x),
            "plane_eig_ratio" => parse_non_negative(v).map(|x| m.fit.plane_eig_ratio = x),
            "std_window" => parse_count(v).map(|x| m.std_window = x),
            "max_descriptors" => parse_num(v).map(|x| m.max_descriptors = x),
            "merge_radius" => parse_non_negative(v).map(|x| m.merge_radius = x),
            "std_side_threshold" => parse_positive(v).map(|x| m.std_side_threshold = x),
            "std_centroid_threshold" => parse_positive(v).map(|x| m.std_centroid_threshold = x),
            "coarse_inlier_distance" => parse_positive(v).map(|x| m.coarse_inlier_distance = x),
            "coarse_min_inliers" => parse_count(v).map(|x| m.coarse_min_inliers = x),
            "kf_translation" => parse_non_negative(v).map(|x| m.kf_translation = x),
            "kf_rotation_deg" => parse_non_negative(v).map(|x| m.kf_rotation_deg = x),
            "dense_voxel" => parse_non_negative(v).map(|x| m.dense_voxel = x),
            "max_iterations" => parse_count(v).map(|x| s.max_iterations = x),
            "function_tolerance" => parse_positive(v).map(|x| s.function_tolerance = x),
            "parameter_tolerance" => parse_positive(v).map(|x| s.parameter_tolerance = x),
            "initial_lambda" => parse_positive(v).map(|x| s.initial_lambda = x),
            "lambda_up" => parse_positive(v).map(|x| s.lambda_up = x),
            "lambda_down" => parse_positive(v).map(|x| s.lambda_down = x),
            "finite_difference_step" => parse_positive(v).map(|x| s.finite_difference_step = x),
            "min_correspondences" => parse_num(v).map(|x| s.min_correspondences = x),
            "degeneracy_ratio" => parse_non_negative(v).map(|x| s.degeneracy_ratio = x),
            "huber_scale" => parse_loss(v).map(|x| s.residual.feature_loss = x),
            "std_rotation_weight" => parse_non_negative(v).map(|x| s.residual.std_weights.rotation = x),
            "std_translation_weight" => parse_non_negative(v).map(|x| s.residual.std_weights.translation = x),
            "surface_voxel" => parse_non_negative(v).map(|x| self.surface_voxel = x),
            "outer_iterations" => parse_count(v).map(|x| self.outer_iterations = x),
            "outer_tolerance" => parse_positive(v).map(|x| self.outer_tolerance = x),
            "initial_match_gate" => parse_non_negative(v).map(|x| self.initial_match_gate = x),
            "constant_velocity" => parse_bool(v).map(|x| self.constant_velocity = x),
            "coarse_init" => parse_bool(v).map(|x| self.coarse_init = x),
            "coarse_hypotheses" => parse_count(v).map(|x| self.coarse_hypotheses = x),
            "stage_timing" => parse_bool(v).map(|x| self.stage_timing = x),
            _ => return None,
        };
        Some(r)
    }

    /// Reads `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: n + 1 });
            };
            let (k, v) = (k.trim(), v.trim());
            match cfg.set(k, v) {
                None => {
                    return Err(ConfigError::UnknownKey {
                        line: n + 1,
                        key: k.to_string(),
                    })
                }
                Some(Err(reason)) => {
                    return Err(ConfigError::BadValue {
                        line: n + 1,
                        key: k.to_string(),
                        value: v.to_string(),
                        reason,
                    })
                }
                Some(Ok(())) => {}
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("scan {scan} is empty")]
    EmptyCloud { scan: usize },
    #[error("scan {scan}: timestamp {time} does not increase")]
    NonMonotonicTime { scan: usize, time: f64 },
    #[error(transparent)]
    Features(#[from] FeatureError),
}

/// Wall time of the three stages; `total` also covers the glue between them.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub preprocessing: Duration,
    pub descriptor_matching: Duration,
    pub optimization: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScanStatus {
    /// First scan: identity pose, maps seeded.
    Seeded,
    Optimized,
    /// No usable correspondences or an unsolvable system; the pose is the
    /// prediction and only the dense map was updated.
    Coasted(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub index: usize,
    pub pose: UnitDualQuaternion,
    pub status: ScanStatus,
    pub reports: Vec<SolverReport>,
    pub timings: StageTimings,
    pub edges: usize,
    pub surfaces: usize,
    pub descriptors: usize,
}

/// Feature extraction on one scan in the sensor frame.
pub fn extract_features(cloud: &PointCloud, cfg: &PipelineConfig) -> Result<FeatureCloud, FeatureError> {
    let sri = project_to_sri(cloud, &cfg.features.sri)?;
    let (edges, surfaces) = extract_edges_surfaces(&sri, cloud, &cfg.features);
    let surfaces = if cfg.surface_voxel > 0.0 {
        let keep = voxel_downsample_indices(&surfaces.points, cfg.surface_voxel);
        surfaces.select(&keep)
    } else {
        surfaces
    };
    Ok(FeatureCloud {
        edges,
        surfaces,
        descriptors: Vec::new(),
    })
}

pub struct Odometry {
    cfg: PipelineConfig,
    maps: LocalMaps,
    trajectory: Vec<StampedPose>,
    timings: Vec<StageTimings>,
}

impl Odometry {
    pub fn new(cfg: PipelineConfig) -> Self {
        Self {
            cfg,
            maps: LocalMaps::default(),
            trajectory: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn maps(&self) -> &LocalMaps {
        &self.maps
    }

    pub fn trajectory(&self) -> &[StampedPose] {
        &self.trajectory
    }

    pub fn timings(&self) -> &[StageTimings] {
        &self.timings
    }

    /// Pose guess for the next scan.
    pub fn predict(&self) -> UnitDualQuaternion {
        let n = self.trajectory.len();
        match n {
            0 => UnitDualQuaternion::IDENTITY,
            1 => self.trajectory[0].pose,
            _ => {
                let last = self.trajectory[n - 1].pose;
                if !self.cfg.constant_velocity {
                    return last;
                }
                let step = self.trajectory[n - 2].pose.inverse() * last;
                match dq_log(&step) {
                    Ok(v) => UnitDualQuaternion::normalize((last * dq_exp(&v)).as_dq())
                        .map(|q| q.canonical())
                        .unwrap_or(last),
                    Err(_) => last,
                }
            }
        }
    }

    /// Match gate used in outer round `round`.
    pub fn match_gate(&self, round: usize) -> f64 {
        let last = self.cfg.map.match_gate;
        let first = self.cfg.initial_match_gate;
        if last <= 0.0 || first <= last {
            return last;
        }
        let g = first * 0.5f64.powi(round.min(64) as i32);
        if g <= last { last } else { g }
    }

    /// Outer rounds of matching and solving from `init`.
    fn register(&self, index: usize, features: &FeatureCloud, init: UnitDualQuaternion, timings: &mut StageTimings) -> Registration {
        let timed = self.cfg.stage_timing;
        let clock = || timed.then(Instant::now);
        let since = |t: Option<Instant>| t.map_or(Duration::ZERO, |t| t.elapsed());
        let mut pose = init;
        let mut reports = Vec::new();
        let mut status = ScanStatus::Optimized;
        let mut score = 0;
        let mut map_cfg = self.cfg.map.clone();
        for round in 0..self.cfg.outer_iterations {
            let gate = self.match_gate(round);
            map_cfg.match_gate = gate;
            let t = clock();
            let corr = self.maps.find_correspondences(features, &pose, &map_cfg);
            timings.descriptor_matching += since(t);
            let corr = match corr {
                Ok(c) => c,
                Err(MapError::NoCorrespondences) => {
                    if round == 0 {
                        status = ScanStatus::Coasted("no correspondences".into());
                    }
                    break;
                }
            };
            log::debug!(
                "scan {index} round {round}: {} edges, {} surfaces, {} descriptors matched",
                corr.edges.len(),
                corr.surfaces.len(),
                corr.stds.len()
            );
            score = corr.edges.len() + corr.surfaces.len();
            let t = clock();
            let solved = solve(&pose, &corr, &self.cfg.solver);
            timings.optimization += since(t);
            match solved {
                Ok((q, report)) => {
                    if log::log_enabled!(log::Level::Debug) {
                        for line in report.to_log().lines() {
                            log::debug!("scan {index} round {round} solver: {line}");
                        }
                    }
                    let moved = (pose.inverse() * q).to_rigid();
                    pose = q;
                    reports.push(report);
                    let settled = gate == self.cfg.map.match_gate;
                    if settled && moved.translation.norm() < self.cfg.outer_tolerance && moved.angle() < self.cfg.outer_tolerance {
                        break;
                    }
                }
                Err(e) => {
                    log::debug!("scan {index}: {e}");
                    if round == 0 {
                        status = ScanStatus::Coasted(e.to_string());
                    }
                    break;
                }
            }
        }
        if matches!(status, ScanStatus::Coasted(_)) {
            score = 0;
        }
        Registration {
            pose,
            status,
            reports,
            score,
        }
    }

    pub fn process_scan(&mut self, cloud: &PointCloud, time: f64) -> Result<ScanResult, PipelineError> {
        let index = self.trajectory.len();
        if cloud.is_empty() {
            return Err(PipelineError::EmptyCloud { scan: index });
        }
        if let Some(last) = self.trajectory.last() {
            if !(time > last.time) {
                return Err(PipelineError::NonMonotonicTime { scan: index, time });
            }
        }
        let timed = self.cfg.stage_timing;
        let clock = || timed.then(Instant::now);
        let since = |t: Option<Instant>| t.map_or(Duration::ZERO, |t| t.elapsed());
        let start = clock();
        let mut timings = StageTimings::default();

        let t = clock();
        let mut features = extract_features(cloud, &self.cfg)?;
        timings.preprocessing = since(t);

        let t = clock();
        features.descriptors = extract_descriptors(cloud, &self.cfg.descriptor);
        timings.descriptor_matching += since(t);

        let predicted = self.predict();
        let (pose, status, reports) = if index == 0 || self.maps.is_empty() {
            (predicted, ScanStatus::Seeded, Vec::new())
        } else {
            let mut starts = vec![predicted];
            if self.cfg.coarse_init && self.trajectory.len() == 1 {
                let t = clock();
                let hyps = self.maps.stds.coarse_hypotheses(&features.descriptors, &self.cfg.map, self.cfg.coarse_hypotheses);
                timings.descriptor_matching += since(t);
                starts.extend(hyps.into_iter().map(|(q, _)| q));
            }
            let mut best: Option<Registration> = None;
            for init in starts {
                let reg = self.register(index, &features, init, &mut timings);
                if best.as_ref().is_none_or(|b| reg.score > b.score) {
                    best = Some(reg);
                }
            }
            let reg = best.expect("at least the prediction");
            (reg.pose, reg.status, reg.reports)
        };

        let t = clock();
        if !matches!(status, ScanStatus::Coasted(_)) {
            self.maps.integrate_scan(&pose, &features, &self.cfg.map);
        }
        self.maps.dense.update(&pose, cloud, &self.cfg.map);
        timings.descriptor_matching += since(t);
        timings.total = since(start);

        if let ScanStatus::Coasted(why) = &status {
            log::info!("scan {index}: holding predicted pose ({why})");
        }
        self.trajectory.push(StampedPose { time, pose });
        self.timings.push(timings);
        Ok(ScanResult {
            index,
            pose,
            status,
            reports,
            timings,
            edges: features.edges.len(),
            surfaces: features.surfaces.len(),
            descriptors: features.descriptors.len(),
        })
    }

    /// `scan_index,preproc_ms,descriptor_ms,solve_ms,total_ms`
    pub fn timing_csv(&self) -> String {
        format_timing_csv(&self.timings)
    }
}

struct Registration {
    pose: UnitDualQuaternion,
    status: ScanStatus,
    reports: Vec<SolverReport>,
    /// Feature matches accepted in the last round.
    score: usize,
}

fn ms(d: Duration) -> String {
    format!("{:.3}", d.as_secs_f64() * 1e3)
}

pub fn format_timing_csv(timings: &[StageTimings]) -> String {
    let mut s = String::from("scan_index,preproc_ms,descriptor_ms,solve_ms,total_ms\n");
    for (i, t) in timings.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{}",
            ms(t.preprocessing),
            ms(t.descriptor_matching),
            ms(t.optimization),
            ms(t.total)
        );
    }
    s
}
