//! Ray-casting LiDAR simulator over bounded planes.
//!
//! A scene is a set of planes `n · x = d`, each clipped to an axis-aligned
//! box, plus a scripted sensor trajectory. Scan files use line records:
//!
//! ```text
//! plane nx ny nz d xmin xmax ymin ymax zmin zmax
//! pose t x y z qx qy qz qw
//! sensor beams cols fov_up_deg fov_down_deg max_range
//! noise sigma
//! seed n
//! ```
//!
//! `sensor`, `noise` and `seed` are optional. Scans are emitted in the
//! sensor frame with the beam index as ring.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::cloud::PointCloud;
use crate::dq::{Quaternion, RigidTransform, Vec3};
use crate::exec;
use crate::features::{FeatureCloud, SriConfig};
use crate::residuals::{Correspondences, DualPlane, EdgeMatch, PlaneMatch, PluckerLine, StdMatch};
use crate::io::{fmt_sig9, StampedPose};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("scene is unobservable: needs at least 3 planes with linearly independent normals ({found} distinct normal directions)")]
    Unobservable { found: usize },
    #[error("scene has no poses")]
    NoPoses,
    #[error("scan {scan}: no ray hits the scene (sensor outside the scene?)")]
    EmptyScan { scan: usize },
}

/// A plane `normal · x = d` restricted to an axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundedPlane {
    pub normal: Vec3,
    pub d: f64,
    pub min: Vec3,
    pub max: Vec3,
}

impl BoundedPlane {
    /// Normalizes `normal` (and scales `d` with it).
    pub fn new(normal: Vec3, d: f64, min: Vec3, max: Vec3) -> Self {
        let n = normal.norm();
        Self {
            normal: normal / n,
            d: d / n,
            min,
            max,
        }
    }

    /// Axis-aligned rectangle `axis = value`, spanning `min..max` in the
    /// other two coordinates (the `axis` entries of `min`/`max` are ignored).
    pub fn axis_aligned(axis: usize, value: f64, mut min: Vec3, mut max: Vec3) -> Self {
        let mut n = Vec3::zeros();
        n[axis] = 1.0;
        min[axis] = value;
        max[axis] = value;
        Self::new(n, value, min, max)
    }

    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - tol && p[i] <= self.max[i] + tol)
    }

    /// Ray parameter of the first hit in `(0, max_t)`.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3, max_t: f64) -> Option<f64> {
        let denom = self.normal.dot(dir);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = (self.d - self.normal.dot(origin)) / denom;
        if !(t > 1e-6 && t < max_t) {
            return None;
        }
        self.contains(&(origin + dir * t), 1e-9).then_some(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    pub beams: usize,
    pub cols: usize,
    pub fov_up_deg: f64,
    pub fov_down_deg: f64,
    pub max_range: f64,
    pub noise_sigma: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        let sri = SriConfig::default();
        Self {
            beams: sri.rows,
            cols: sri.cols,
            fov_up_deg: sri.fov_up_deg,
            fov_down_deg: sri.fov_down_deg,
            max_range: 120.0,
            noise_sigma: 0.0,
        }
    }
}

impl SensorModel {
    /// Elevation of beam `b`; beam 0 points highest.
    pub fn elevation(&self, beam: usize) -> f64 {
        let up = self.fov_up_deg.to_radians();
        let down = self.fov_down_deg.to_radians();
        if self.beams < 2 {
            return 0.5 * (up + down);
        }
        up - (up - down) * beam as f64 / (self.beams - 1) as f64
    }

    /// Ray azimuth of column `c`, at the bin centre.
    pub fn azimuth(&self, col: usize) -> f64 {
        -std::f64::consts::PI + (col as f64 + 0.5) * 2.0 * std::f64::consts::PI / self.cols as f64
    }

    /// The range-image layout that puts beam `b` in row `b`.
    pub fn sri_config(&self) -> SriConfig {
        SriConfig {
            rows: self.beams,
            cols: self.cols,
            fov_up_deg: self.fov_up_deg,
            fov_down_deg: self.fov_down_deg,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub planes: Vec<BoundedPlane>,
    pub poses: Vec<StampedPose>,
    pub sensor: SensorModel,
    pub seed: u64,
}

/// A ray-cast scan with the index of the plane each point came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScan {
    pub cloud: PointCloud,
    pub plane_ids: Vec<usize>,
}

/// A finite segment where two scene planes meet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Junction {
    pub a: Vec3,
    pub b: Vec3,
    pub planes: (usize, usize),
}

impl Junction {
    pub fn distance(&self, p: &Vec3) -> f64 {
        let ab = self.b - self.a;
        let t = ((p - self.a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        (p - (self.a + ab * t)).norm()
    }
}

impl SyntheticScene {
    pub fn new(planes: Vec<BoundedPlane>, poses: Vec<StampedPose>) -> Self {
        Self {
            planes,
            poses,
            sensor: SensorModel::default(),
            seed: 0,
        }
    }

    /// Fails unless three plane normals are linearly independent.
    pub fn check_observable(&self) -> Result<(), SceneError> {
        let mut dirs: Vec<Vec3> = Vec::new();
        for p in &self.planes {
            if !dirs.iter().any(|d| d.cross(&p.normal).norm() < 1e-6) {
                dirs.push(p.normal);
            }
        }
        for i in 0..dirs.len() {
            for j in (i + 1)..dirs.len() {
                for k in (j + 1)..dirs.len() {
                    if dirs[i].cross(&dirs[j]).dot(&dirs[k]).abs() > 1e-6 {
                        return Ok(());
                    }
                }
            }
        }
        Err(SceneError::Unobservable { found: dirs.len() })
    }

    /// Casts every ray of the sensor at `pose`.
    pub fn cast(&self, pose: &RigidTransform, noise_seed: u64) -> SyntheticScan {
        let s = &self.sensor;
        let origin = pose.translation;
        let rows = exec::map_range(s.beams, |beam| {
            let el = s.elevation(beam);
            let mut hits = Vec::new();
            for col in 0..s.cols {
                let az = s.azimuth(col);
                let dir_s = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
                let dir = pose.rotation.rotate(&dir_s);
                let mut best: Option<(f64, usize)> = None;
                for (i, plane) in self.planes.iter().enumerate() {
                    let max_t = best.map_or(s.max_range, |b| b.0);
                    if let Some(t) = plane.intersect(&origin, &dir, max_t) {
                        best = Some((t, i));
                    }
                }
                if let Some((t, i)) = best {
                    hits.push((dir_s, t, i, beam as u16));
                }
            }
            hits
        });
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let noise = Normal::new(0.0, s.noise_sigma.max(0.0)).expect("finite sigma");
        let mut points = Vec::new();
        let mut ring = Vec::new();
        let mut plane_ids = Vec::new();
        for (dir_s, t, i, beam) in rows.into_iter().flatten() {
            let r = if s.noise_sigma > 0.0 { t + noise.sample(&mut rng) } else { t };
            points.push(dir_s * r);
            ring.push(beam);
            plane_ids.push(i);
        }
        let n = points.len();
        SyntheticScan {
            cloud: PointCloud::with_attributes(points, Some(vec![0.0; n]), Some(ring)),
            plane_ids,
        }
    }

    /// Seed of the noise stream of scan `k`.
    pub fn scan_seed(&self, k: usize) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(k as u64)
    }

    /// All scans along the scripted trajectory with their true poses.
    pub fn generate(&self) -> Result<Vec<(SyntheticScan, StampedPose)>, SceneError> {
        self.check_observable()?;
        if self.poses.is_empty() {
            return Err(SceneError::NoPoses);
        }
        let mut out = Vec::with_capacity(self.poses.len());
        for (k, sp) in self.poses.iter().enumerate() {
            let scan = self.cast(&sp.pose.to_rigid(), self.scan_seed(k));
            if scan.cloud.is_empty() {
                return Err(SceneError::EmptyScan { scan: k });
            }
            out.push((scan, *sp));
        }
        Ok(out)
    }

    /// Segments where pairs of non-parallel planes meet inside both boxes.
    pub fn junctions(&self) -> Vec<Junction> {
        let mut out = Vec::new();
        for i in 0..self.planes.len() {
            for j in (i + 1)..self.planes.len() {
                let (p, q) = (&self.planes[i], &self.planes[j]);
                let dir = p.normal.cross(&q.normal);
                if dir.norm() < 1e-9 {
                    continue;
                }
                // a point on both planes, then clip the line to both boxes
                let m = nalgebra::Matrix3::from_rows(&[p.normal.transpose(), q.normal.transpose(), dir.transpose()]);
                let Some(inv) = m.try_inverse() else { continue };
                let x0 = inv * Vec3::new(p.d, q.d, 0.0);
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for b in [p, q] {
                    for a in 0..3 {
                        let (mn, mx) = (b.min[a] - 1e-9, b.max[a] + 1e-9);
                        if dir[a].abs() < 1e-12 {
                            if x0[a] < mn || x0[a] > mx {
                                lo = f64::INFINITY;
                            }
                            continue;
                        }
                        let (t1, t2) = ((mn - x0[a]) / dir[a], (mx - x0[a]) / dir[a]);
                        lo = lo.max(t1.min(t2));
                        hi = hi.min(t1.max(t2));
                    }
                }
                if hi - lo > 1e-6 {
                    out.push(Junction {
                        a: x0 + dir * lo,
                        b: x0 + dir * hi,
                        planes: (i, j),
                    });
                }
            }
        }
        out
    }

    /// Exact correspondences read off the scene for `features` seen from
    /// `pose`. Targets are expressed in the frame `reference`, so every
    /// residual vanishes at `reference^-1 * pose`. Surface points take the
    /// scene plane they lie on; edge points within `edge_radius` of a
    /// junction take the line through their true position along it;
    /// descriptors take their own image under the true motion. Points on no
    /// plane are skipped.
    pub fn oracle_correspondences(
        &self,
        reference: &RigidTransform,
        pose: &RigidTransform,
        features: &FeatureCloud,
        edge_radius: f64,
    ) -> Correspondences {
        let to_ref = reference.inverse();
        let rel = to_ref.compose(pose);
        let junctions = self.junctions();
        let surfaces = features
            .surfaces
            .points
            .iter()
            .filter_map(|p| {
                let w = pose.transform_point(p);
                let plane = self.planes.iter().find(|b| (b.normal.dot(&w) - b.d).abs() < 1e-6 && b.contains(&w, 1e-6))?;
                let normal = to_ref.rotation.rotate(&plane.normal);
                Some(PlaneMatch {
                    point: *p,
                    plane: DualPlane {
                        normal: Quaternion::pure(&normal),
                        distance: plane.d - plane.normal.dot(&reference.translation),
                    },
                })
            })
            .collect();
        let edges = features
            .edges
            .points
            .iter()
            .filter_map(|p| {
                let w = pose.transform_point(p);
                let j = junctions
                    .iter()
                    .filter(|j| j.distance(&w) < edge_radius)
                    .min_by(|a, b| a.distance(&w).total_cmp(&b.distance(&w)))?;
                let dir = to_ref.rotation.rotate(&(j.b - j.a));
                Some(EdgeMatch {
                    point: *p,
                    line: PluckerLine::through(&rel.transform_point(p), &dir),
                })
            })
            .collect();
        let rel_dq = rel.to_unit_dq();
        let stds = features
            .descriptors
            .iter()
            .map(|d| StdMatch {
                current: d.frame,
                map: rel_dq * d.frame,
            })
            .collect();
        Correspondences { edges, surfaces, stds }
    }

    pub fn parse(text: &str) -> Result<Self, SceneError> {
        let mut scene = SyntheticScene::new(Vec::new(), Vec::new());
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| SceneError::Parse { line: n + 1, message };
            let mut it = line.split_whitespace();
            let tag = it.next().expect("non-empty line");
            let vals = it
                .map(|t| t.parse::<f64>().map_err(|e| err(format!("{t:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let want = match tag {
                "plane" => 10,
                "pose" => 8,
                "sensor" => 5,
                "noise" | "seed" => 1,
                _ => return Err(err(format!("unknown record {tag:?}"))),
            };
            if vals.len() != want {
                return Err(err(format!("{tag} needs {want} values, found {}", vals.len())));
            }
            match tag {
                "plane" => {
                    let normal = Vec3::new(vals[0], vals[1], vals[2]);
                    if normal.norm() < 1e-12 {
                        return Err(err("plane normal is zero".into()));
                    }
                    scene.planes.push(BoundedPlane::new(
                        normal,
                        vals[3],
                        Vec3::new(vals[4], vals[6], vals[8]),
                        Vec3::new(vals[5], vals[7], vals[9]),
                    ));
                }
                "pose" => {
                    let q = Quaternion::new(vals[7], vals[4], vals[5], vals[6]);
                    if q.norm() < 1e-9 {
                        return Err(err("pose quaternion is zero".into()));
                    }
                    if let Some(last) = scene.poses.last() {
                        if vals[0] <= last.time {
                            return Err(err("pose timestamps must increase".into()));
                        }
                    }
                    let rt = RigidTransform::new(q, Vec3::new(vals[1], vals[2], vals[3]));
                    scene.poses.push(StampedPose {
                        time: vals[0],
                        pose: rt.to_unit_dq(),
                    });
                }
                "sensor" => {
                    if vals[0] < 1.0 || vals[1] < 1.0 || vals[0].fract() != 0.0 || vals[1].fract() != 0.0 {
                        return Err(err("beams and cols must be positive integers".into()));
                    }
                    scene.sensor.beams = vals[0] as usize;
                    scene.sensor.cols = vals[1] as usize;
                    scene.sensor.fov_up_deg = vals[2];
                    scene.sensor.fov_down_deg = vals[3];
                    scene.sensor.max_range = vals[4];
                }
                "noise" => scene.sensor.noise_sigma = vals[0],
                _ => {
                    if vals[0] < 0.0 || vals[0].fract() != 0.0 {
                        return Err(err("seed must be a non-negative integer".into()));
                    }
                    scene.seed = vals[0] as u64;
                }
            }
        }
        Ok(scene)
    }

    pub fn to_text(&self) -> String {
        let s = &self.sensor;
        let mut out = String::new();
        let f = |v: f64| fmt_sig9(v);
        let _ = writeln!(
            out,
            "sensor {} {} {} {} {}",
            s.beams,
            s.cols,
            f(s.fov_up_deg),
            f(s.fov_down_deg),
            f(s.max_range)
        );
        let _ = writeln!(out, "noise {}", f(s.noise_sigma));
        let _ = writeln!(out, "seed {}", self.seed);
        for p in &self.planes {
            let _ = writeln!(
                out,
                "plane {} {} {} {} {} {} {} {} {} {}",
                f(p.normal.x),
                f(p.normal.y),
                f(p.normal.z),
                f(p.d),
                f(p.min.x),
                f(p.max.x),
                f(p.min.y),
                f(p.max.y),
                f(p.min.z),
                f(p.max.z)
            );
        }
        for sp in &self.poses {
            let _ = writeln!(out, "pose {}", crate::io::format_tum_pose(sp.time, &sp.pose));
        }
        out
    }
}

/// The six faces of an axis-aligned box.
pub fn box_faces(min: Vec3, max: Vec3) -> Vec<BoundedPlane> {
    let mut out = Vec::with_capacity(6);
    for axis in 0..3 {
        for v in [min[axis], max[axis]] {
            out.push(BoundedPlane::axis_aligned(axis, v, min, max));
        }
    }
    out
}

/// A 24 m × 16 m × 5 m room with crates of assorted sizes.
pub fn box_room_planes() -> Vec<BoundedPlane> {
    let mut planes = box_faces(Vec3::new(-12.0, -8.0, -1.5), Vec3::new(12.0, 8.0, 3.5));
    let crates = [
        (Vec3::new(6.0, 4.0, -0.9), Vec3::new(0.6, 0.8, 0.6)),
        (Vec3::new(-7.0, 3.5, -0.7), Vec3::new(0.8, 0.5, 0.8)),
        (Vec3::new(-5.0, -5.0, -0.8), Vec3::new(0.7, 0.7, 0.7)),
        (Vec3::new(8.0, -4.5, -0.6), Vec3::new(0.5, 0.9, 0.9)),
        (Vec3::new(1.0, 6.0, -1.0), Vec3::new(0.9, 0.5, 0.5)),
        (Vec3::new(-1.5, -6.3, -0.75), Vec3::new(0.6, 0.6, 0.75)),
        (Vec3::new(10.5, 1.0, -0.5), Vec3::new(0.5, 0.6, 1.0)),
        (Vec3::new(-10.3, -1.0, -0.9), Vec3::new(0.6, 0.9, 0.6)),
    ];
    for (c, h) in crates {
        planes.extend(box_faces(c - h, c + h));
    }
    planes
}

/// The box room seen from `n` poses on a slow arc around the centre.
pub fn box_room_scene(n: usize, noise_sigma: f64, seed: u64) -> SyntheticScene {
    let poses = (0..n)
        .map(|k| {
            let a = 0.05 * k as f64;
            let rt = RigidTransform::from_axis_angle(
                &Vec3::z(),
                a,
                Vec3::new(2.0 * a.sin(), 1.5 * (1.0 - a.cos()), 0.02 * k as f64),
            );
            StampedPose {
                time: 0.1 * k as f64,
                pose: rt.to_unit_dq(),
            }
        })
        .collect();
    let mut scene = SyntheticScene::new(box_room_planes(), poses);
    scene.sensor.noise_sigma = noise_sigma;
    scene.seed = seed;
    scene
}

/// Polygonal ring corridor around the origin: `segments` straight wall
/// pieces on each side, crates and pillars along the walls. The sensor
/// drives the centre line at 1.5 m above the floor.
pub fn corridor_loop_planes(center_radius: f64, width: f64, segments: usize) -> Vec<BoundedPlane> {
    let height = 4.0;
    let (z0, z1) = (-1.5, height - 1.5);
    let r_in = center_radius - 0.5 * width;
    let r_out = center_radius + 0.5 * width;
    let step = 2.0 * std::f64::consts::PI / segments as f64;
    let mut planes = Vec::new();
    let wall = |r: f64, k: usize| {
        let a0 = k as f64 * step;
        let a1 = a0 + step;
        // polygon vertices on radius r / cos(step/2) keep the wall at distance r
        let rv = r / (0.5 * step).cos();
        let p0 = Vec3::new(rv * a0.cos(), rv * a0.sin(), 0.0);
        let p1 = Vec3::new(rv * a1.cos(), rv * a1.sin(), 0.0);
        let mid_a = a0 + 0.5 * step;
        let n = Vec3::new(mid_a.cos(), mid_a.sin(), 0.0);
        let mn = Vec3::new(p0.x.min(p1.x), p0.y.min(p1.y), z0);
        let mx = Vec3::new(p0.x.max(p1.x), p0.y.max(p1.y), z1);
        BoundedPlane::new(n, r, mn, mx)
    };
    for k in 0..segments {
        planes.push(wall(r_in, k));
        planes.push(wall(r_out, k));
    }
    let extent = r_out / (0.5 * step).cos() + 0.1;
    let lo = Vec3::new(-extent, -extent, z0);
    let hi = Vec3::new(extent, extent, z1);
    planes.push(BoundedPlane::axis_aligned(2, z0, lo, hi));
    planes.push(BoundedPlane::axis_aligned(2, z1, lo, hi));
    // obstacles alternate between the walls
    for k in 0..segments {
        let a = (k as f64 + 0.3) * step;
        let (r, half) = if k % 2 == 0 {
            (r_out - 0.9, Vec3::new(0.6, 0.5, 0.6))
        } else {
            (r_in + 0.8, Vec3::new(0.4, 0.4, 1.0))
        };
        let c = Vec3::new(r * a.cos(), r * a.sin(), z0 + half.z);
        planes.extend(box_faces(c - half, c + half));
    }
    planes
}

/// `n` scans evenly spaced along one full lap of the corridor loop.
pub fn corridor_loop_scene(n: usize, center_radius: f64, noise_sigma: f64, seed: u64) -> SyntheticScene {
    let poses = (0..n)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let pos = Vec3::new(center_radius * a.cos(), center_radius * a.sin(), 0.0);
            // heading along the counter-clockwise tangent
            let rt = RigidTransform::from_axis_angle(&Vec3::z(), a + std::f64::consts::FRAC_PI_2, pos);
            StampedPose {
                time: 0.1 * k as f64,
                pose: rt.to_unit_dq(),
            }
        })
        .collect();
    let mut scene = SyntheticScene::new(corridor_loop_planes(center_radius, 8.0, 24), poses);
    scene.sensor.noise_sigma = noise_sigma;
    scene.seed = seed;
    scene
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_planes_are_unobservable() {
        let text = "plane 0 0 1 0 -5 5 -5 5 0 0\nplane 1 0 0 3 3 3 -5 5 0 4\npose 0 0 0 1 0 0 0 1\n";
        let scene = SyntheticScene::parse(text).unwrap();
        assert_eq!(scene.generate().unwrap_err(), SceneError::Unobservable { found: 2 });
    }

    #[test]
    fn scene_text_round_trip() {
        let scene = box_room_scene(3, 0.01, 7);
        let back = SyntheticScene::parse(&scene.to_text()).unwrap();
        assert_eq!(back.planes.len(), scene.planes.len());
        assert_eq!(back.seed, 7);
        assert_eq!(back.sensor, scene.sensor);
        for (a, b) in back.poses.iter().zip(&scene.poses) {
            assert!(a.pose.distance_mod_sign(&b.pose) < 1e-8);
        }
    }

    #[test]
    fn parse_errors_name_the_line() {
        assert!(matches!(SyntheticScene::parse("plane 1 2\n"), Err(SceneError::Parse { line: 1, .. })));
        assert!(matches!(SyntheticScene::parse("\nwall 1\n"), Err(SceneError::Parse { line: 2, .. })));
    }

    #[test]
    fn static_noise_free_scans_repeat() {
        let mut scene = box_room_scene(1, 0.0, 0);
        scene.poses.push(StampedPose {
            time: 1.0,
            pose: scene.poses[0].pose,
        });
        let scans = scene.generate().unwrap();
        assert_eq!(scans[0].0, scans[1].0);
        assert!(scans[0].0.cloud.len() > 60_000);
    }

    #[test]
    fn points_lie_on_their_planes() {
        let scene = box_room_scene(2, 0.0, 0);
        let scans = scene.generate().unwrap();
        let (scan, sp) = &scans[1];
        let pose = sp.pose.to_rigid();
        for (p, &i) in scan.cloud.points.iter().zip(&scan.plane_ids) {
            let g = pose.transform_point(p);
            let plane = &scene.planes[i];
            assert!((plane.normal.dot(&g) - plane.d).abs() < 1e-9);
            assert!(plane.contains(&g, 1e-6));
        }
    }

    #[test]
    fn sensor_outside_scene() {
        let mut scene = box_room_scene(1, 0.0, 0);
        scene.sensor.max_range = 1.0;
        assert_eq!(scene.generate().unwrap_err(), SceneError::EmptyScan { scan: 0 });
    }

    #[test]
    fn box_junctions() {
        let scene = SyntheticScene::new(box_faces(Vec3::zeros(), Vec3::new(2.0, 3.0, 4.0)), vec![]);
        let j = scene.junctions();
        assert_eq!(j.len(), 12);
        let total: f64 = j.iter().map(|s| (s.b - s.a).norm()).sum();
        assert!((total - 4.0 * (2.0 + 3.0 + 4.0)).abs() < 1e-6);
    }

    #[test]
    fn range_noise_matches_sigma() {
        let mut scene = box_room_scene(1, 0.0, 0);
        let pose = scene.poses[0].pose.to_rigid();
        let clean = scene.cast(&pose, 0);
        scene.sensor.noise_sigma = 0.01;
        let mut errs = Vec::new();
        for seed in 0..2 {
            let noisy = scene.cast(&pose, seed);
            assert_eq!(noisy.plane_ids, clean.plane_ids);
            errs.extend(noisy.cloud.points.iter().zip(&clean.cloud.points).map(|(a, b)| a.norm() - b.norm()));
        }
        assert!(errs.len() >= 100_000);
        let n = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / n;
        let sd = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((sd - 0.01).abs() < 0.001, "sd {sd}");
        assert!(mean.abs() < 0.001, "mean {mean}");
    }

    /// Every edge cell's 3x3 neighbourhood straddles a junction: the
    /// junction passes no farther from the edge point than its farthest
    /// neighbouring sample.
    #[test]
    fn corridor_edges_sit_on_junctions() {
        use crate::features::{classify, project_to_sri, FeatureConfig};
        let scene = corridor_loop_scene(100, 200.0 / (2.0 * std::f64::consts::PI), 0.0, 0);
        let pose = scene.poses[0].pose.to_rigid();
        let cloud = scene.cast(&pose, 0).cloud;
        let cfg = FeatureConfig {
            sri: scene.sensor.sri_config(),
            ..FeatureConfig::default()
        };
        let sri = project_to_sri(&cloud, &cfg.sri).unwrap();
        let mut cell = vec![(0, 0); cloud.len()];
        for r in 0..sri.rows {
            for c in 0..sri.cols {
                if let Some(i) = sri.source_index(r, c) {
                    cell[i] = (r, c);
                }
            }
        }
        let junctions = scene.junctions();
        let edges = classify(&sri, &cloud, &cfg).edges;
        assert!(edges.len() > 50);
        for &i in &edges {
            let p = cloud.points[i];
            let (row, col) = cell[i];
            let mut reach = 0.0f64;
            for r in row.saturating_sub(1)..(row + 2).min(sri.rows) {
                for dc in [sri.cols - 1, 0, 1] {
                    if let Some(j) = sri.source_index(r, (col + dc) % sri.cols) {
                        reach = reach.max((cloud.points[j] - p).norm());
                    }
                }
            }
            let w = pose.transform_point(&p);
            let d = junctions.iter().map(|j| j.distance(&w)).fold(f64::INFINITY, f64::min);
            assert!(d <= reach + 1e-9, "edge at {w:?} is {d} m from every junction, neighbourhood {reach} m");
        }
    }
}
