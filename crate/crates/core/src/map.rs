//! Global-frame maps: edge and surface points with exact KNN indices, the
//! sliding STD window with vertex-merge filtering, and the keyframed dense
//! map.

use std::collections::{HashSet, VecDeque};

use thiserror::Error;

use crate::cloud::{voxel_key, PointCloud};
use crate::descriptor::{dump_descriptors, MatchVector24, StdDescriptor};
use crate::dq::{UnitDualQuaternion, Vec3};
use crate::exec;
use crate::features::FeatureCloud;
use crate::io::fmt_sig9;
use crate::kdtree::KdTree;
use crate::residuals::{edge_residual, fit_line, fit_plane, plane_residual, Correspondences, EdgeMatch, FitConfig, PlaneMatch, StdMatch};

#[derive(Debug, Clone, PartialEq)]
pub struct MapConfig {
    /// Points farther than this from the current position are dropped.
    pub map_window: f64,
    /// A new map point is kept only if no earlier scan filled its voxel.
    /// 0 keeps all.
    pub feature_voxel: f64,
    /// Neighbour sets wider than this are not fitted.
    pub max_neighbor_distance: f64,
    /// Matches whose point lies farther than this from the fitted line or
    /// plane at the initial pose are dropped. 0 disables.
    pub match_gate: f64,
    pub fit: FitConfig,
    /// Number of scans `h` in the STD window.
    pub std_window: usize,
    pub max_descriptors: usize,
    pub merge_radius: f64,
    pub std_side_threshold: f64,
    pub std_centroid_threshold: f64,
    /// Coarse alignment: a descriptor supports a candidate pose if its moved
    /// centroid lands this close to its match.
    pub coarse_inlier_distance: f64,
    pub coarse_min_inliers: usize,
    pub kf_translation: f64,
    pub kf_rotation_deg: f64,
    pub dense_voxel: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            map_window: 100.0,
            feature_voxel: 0.2,
            max_neighbor_distance: 1.0,
            match_gate: 0.05,
            fit: FitConfig::default(),
            std_window: 10,
            max_descriptors: 1200,
            merge_radius: 0.2,
            std_side_threshold: 0.3,
            std_centroid_threshold: 2.0,
            coarse_inlier_distance: 0.5,
            coarse_min_inliers: 1,
            kf_translation: 1.0,
            kf_rotation_deg: 10.0,
            dense_voxel: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("no correspondences accepted")]
    NoCorrespondences,
}

fn arrays(points: &[Vec3]) -> Vec<[f64; 3]> {
    points.iter().map(|p| [p.x, p.y, p.z]).collect()
}

/// One point layer of the feature map.
#[derive(Debug, Clone, Default)]
pub struct PointLayer {
    points: Vec<Vec3>,
    occupied: HashSet<(i64, i64, i64)>,
    tree: KdTree<3>,
}

impl PointLayer {
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn tree(&self) -> &KdTree<3> {
        &self.tree
    }

    /// Adds the points whose voxel holds no point from an earlier scan.
    fn append(&mut self, points: impl Iterator<Item = Vec3>, voxel: f64) {
        let mut fresh = Vec::new();
        for p in points {
            if voxel > 0.0 {
                let key = voxel_key(&p, voxel);
                if self.occupied.contains(&key) {
                    continue;
                }
                fresh.push(key);
            }
            self.points.push(p);
        }
        self.occupied.extend(fresh);
    }

    fn prune(&mut self, center: &Vec3, radius: f64, voxel: f64) {
        let before = self.points.len();
        self.points.retain(|p| (p - center).norm() <= radius);
        if self.points.len() != before && voxel > 0.0 {
            self.occupied = self.points.iter().map(|p| voxel_key(p, voxel)).collect();
        }
    }

    fn rebuild(&mut self) {
        self.tree = KdTree::build(arrays(&self.points));
    }

    /// The `k` nearest map points, or `None` if fewer than `k` exist or the
    /// farthest is beyond `max_distance`.
    fn neighbors(&self, query: &Vec3, k: usize, max_distance: f64) -> Option<Vec<Vec3>> {
        let nn = self.tree.knn(&[query.x, query.y, query.z], k);
        if nn.len() < k || nn.last()?.distance_squared > max_distance * max_distance {
            return None;
        }
        Some(nn.iter().map(|n| self.points[n.index]).collect())
    }
}

#[derive(Debug, Clone, Default)]
pub struct FeatureMap {
    pub edges: PointLayer,
    pub surfaces: PointLayer,
}

/// A descriptor in the global frame, tagged with the scan that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedDescriptor {
    pub scan: usize,
    pub descriptor: StdDescriptor,
}

/// The last `h` scans' descriptors, merged and capped.
#[derive(Debug, Clone, Default)]
pub struct StdMap {
    window: VecDeque<(usize, Vec<StdDescriptor>)>,
    merged: Vec<TaggedDescriptor>,
    vectors: Vec<MatchVector24>,
    tree: KdTree<24>,
}

impl StdMap {
    pub fn descriptors(&self) -> &[TaggedDescriptor] {
        &self.merged
    }

    pub fn len(&self) -> usize {
        self.merged.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merged.is_empty()
    }

    /// Scan indices currently in the window, oldest first.
    pub fn window_scans(&self) -> Vec<usize> {
        self.window.iter().map(|(s, _)| *s).collect()
    }

    pub fn tree(&self) -> &KdTree<24> {
        &self.tree
    }

    /// Pushes one scan's global-frame descriptors, evicts scans beyond `h`,
    /// and re-runs the merge filter.
    pub fn push(&mut self, scan: usize, descriptors: Vec<StdDescriptor>, cfg: &MapConfig) {
        self.window.push_back((scan, descriptors));
        while self.window.len() > cfg.std_window.max(1) {
            self.window.pop_front();
        }
        self.merged = merge_filter(&self.window, cfg.merge_radius, cfg.max_descriptors);
        self.vectors = self.merged.iter().map(|t| t.descriptor.to_match_vector()).collect();
        self.tree = KdTree::build(self.vectors.iter().map(|v| v.0).collect());
    }

    /// Nearest map descriptor to `query` that passes the side and centroid
    /// gates.
    pub fn best_match(&self, query: &MatchVector24, cfg: &MapConfig) -> Option<&TaggedDescriptor> {
        let nn = self.tree.nearest(&query.0)?;
        let v = &self.vectors[nn.index];
        let ok = query.block_distance(v, MatchVector24::SIDES) < cfg.std_side_threshold
            && query.block_distance(v, MatchVector24::CENTROID) < cfg.std_centroid_threshold;
        ok.then(|| &self.merged[nn.index])
    }

    /// Number of `descriptors` that, moved by `pose`, match a map descriptor
    /// whose centroid is within `cfg.coarse_inlier_distance`.
    pub fn support(&self, descriptors: &[StdDescriptor], pose: &UnitDualQuaternion, cfg: &MapConfig) -> usize {
        descriptors
            .iter()
            .filter(|d| {
                let moved = d.transformed(pose);
                self.best_match(&moved.to_match_vector(), cfg)
                    .is_some_and(|m| (m.descriptor.centroid - moved.centroid).norm() < cfg.coarse_inlier_distance)
            })
            .count()
    }

    /// Up to `limit` pose hypotheses with their support, best first. Every
    /// descriptor pair with similar side lengths proposes
    /// `map.frame * current.frame^-1`; proposals within 0.2 m and 2° of a
    /// better one are dropped, as are those below `cfg.coarse_min_inliers`.
    pub fn coarse_hypotheses(
        &self,
        descriptors: &[StdDescriptor],
        cfg: &MapConfig,
        limit: usize,
    ) -> Vec<(UnitDualQuaternion, usize)> {
        let mut proposals = Vec::new();
        for d in descriptors {
            for m in &self.merged {
                let ds = (0..3).map(|k| (d.sides[k] - m.descriptor.sides[k]).powi(2)).sum::<f64>().sqrt();
                if ds < cfg.std_side_threshold {
                    proposals.push(m.descriptor.frame * d.frame.inverse());
                }
            }
        }
        let scores = exec::map(&proposals, |q| self.support(descriptors, q, cfg));
        let mut ranked: Vec<(UnitDualQuaternion, usize)> = proposals
            .into_iter()
            .zip(scores)
            .filter(|(_, n)| *n >= cfg.coarse_min_inliers.max(1))
            .collect();
        // stable, so equal support keeps proposal order
        ranked.sort_by(|a, b| b.1.cmp(&a.1));
        let mut out: Vec<(UnitDualQuaternion, usize)> = Vec::new();
        for (q, n) in ranked {
            if out.len() >= limit {
                break;
            }
            let near = out.iter().any(|(p, _)| {
                let d = (p.inverse() * q).to_rigid();
                d.translation.norm() < 0.2 && d.angle() < 2f64.to_radians()
            });
            if !near {
                out.push((q, n));
            }
        }
        out
    }
}

struct WindowVertex {
    position: Vec3,
    normal: Vec3,
    support: usize,
    scan: usize,
}

/// Unifies window vertices closer than `radius`, then rebuilds every
/// descriptor from the unified vertices. Representatives are chosen greedily
/// by descending plane support, then ascending scan index. Degenerate and
/// duplicate triangles are dropped; duplicates keep the newest scan tag. If
/// more than `cap` remain, the oldest are dropped.
pub fn merge_filter(window: &VecDeque<(usize, Vec<StdDescriptor>)>, radius: f64, cap: usize) -> Vec<TaggedDescriptor> {
    let mut vertices = Vec::new();
    let mut owners = Vec::new();
    for (scan, descs) in window {
        for d in descs {
            let base = vertices.len();
            for k in 0..3 {
                vertices.push(WindowVertex {
                    position: d.vertices[k],
                    normal: d.normals[k],
                    support: d.support[k],
                    scan: *scan,
                });
            }
            owners.push((*scan, [base, base + 1, base + 2]));
        }
    }
    let mut order: Vec<usize> = (0..vertices.len()).collect();
    order.sort_by(|&a, &b| {
        vertices[b]
            .support
            .cmp(&vertices[a].support)
            .then(vertices[a].scan.cmp(&vertices[b].scan))
            .then(a.cmp(&b))
    });

    let mut reps: Vec<usize> = Vec::new();
    let mut rep_tree_points: Vec<[f64; 3]> = Vec::new();
    let mut assigned = vec![usize::MAX; vertices.len()];
    for &i in &order {
        let p = vertices[i].position;
        let mut best: Option<(f64, usize)> = None;
        for (r, q) in rep_tree_points.iter().enumerate() {
            let d2 = (p.x - q[0]).powi(2) + (p.y - q[1]).powi(2) + (p.z - q[2]).powi(2);
            if d2 < radius * radius && best.is_none_or(|(bd, _)| d2 < bd) {
                best = Some((d2, r));
            }
        }
        assigned[i] = match best {
            Some((_, r)) => r,
            None => {
                reps.push(i);
                rep_tree_points.push([p.x, p.y, p.z]);
                reps.len() - 1
            }
        };
    }

    let mut out: Vec<([usize; 3], TaggedDescriptor)> = Vec::new();
    for (scan, ids) in owners {
        let r = ids.map(|i| assigned[i]);
        if r[0] == r[1] || r[1] == r[2] || r[0] == r[2] {
            continue;
        }
        let mut key = r;
        key.sort_unstable();
        let v = r.map(|k| &vertices[reps[k]]);
        let Some(d) = StdDescriptor::from_vertices(
            v.map(|w| w.position),
            v.map(|w| w.normal),
            v.map(|w| w.support),
        ) else {
            continue;
        };
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, t)) => t.scan = t.scan.max(scan),
            None => out.push((key, TaggedDescriptor { scan, descriptor: d })),
        }
    }
    out.sort_by(|a, b| b.1.scan.cmp(&a.1.scan).then(a.0.cmp(&b.0)));
    out.truncate(cap);
    out.sort_by(|a, b| a.1.scan.cmp(&b.1.scan).then(a.0.cmp(&b.0)));
    out.into_iter().map(|(_, t)| t).collect()
}

/// Keyframed global cloud with at most one point per voxel.
#[derive(Debug, Clone, Default)]
pub struct DenseMap {
    points: Vec<Vec3>,
    occupied: HashSet<(i64, i64, i64)>,
    last_keyframe: Option<UnitDualQuaternion>,
    keyframes: usize,
}

impl DenseMap {
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn keyframes(&self) -> usize {
        self.keyframes
    }

    /// Appends `cloud` (sensor frame) if `pose` moved more than the keyframe
    /// thresholds since the last keyframe. Returns whether it did.
    pub fn update(&mut self, pose: &UnitDualQuaternion, cloud: &PointCloud, cfg: &MapConfig) -> bool {
        if let Some(last) = &self.last_keyframe {
            let rel = (last.inverse() * *pose).to_rigid();
            if rel.translation.norm() <= cfg.kf_translation && rel.angle() <= cfg.kf_rotation_deg.to_radians() {
                return false;
            }
        }
        for p in &cloud.points {
            let g = pose.transform_point(p);
            if cfg.dense_voxel > 0.0 && !self.occupied.insert(voxel_key(&g, cfg.dense_voxel)) {
                continue;
            }
            self.points.push(g);
        }
        self.last_keyframe = Some(*pose);
        self.keyframes += 1;
        true
    }

    /// `x y z` per line.
    pub fn export(&self) -> String {
        let mut s = String::with_capacity(self.points.len() * 30);
        for p in &self.points {
            s.push_str(&format!("{} {} {}\n", fmt_sig9(p.x), fmt_sig9(p.y), fmt_sig9(p.z)));
        }
        s
    }
}

#[derive(Debug, Clone, Default)]
pub struct LocalMaps {
    pub features: FeatureMap,
    pub stds: StdMap,
    pub dense: DenseMap,
    scans: usize,
}

impl LocalMaps {
    pub fn is_empty(&self) -> bool {
        self.features.edges.is_empty() && self.features.surfaces.is_empty() && self.stds.is_empty()
    }

    /// Number of scans integrated so far.
    pub fn scans(&self) -> usize {
        self.scans
    }

    /// Moves the scan's features into the global frame with `pose` and adds
    /// them to the maps, then prunes to the window around `pose`.
    pub fn integrate_scan(&mut self, pose: &UnitDualQuaternion, features: &FeatureCloud, cfg: &MapConfig) {
        let fm = &mut self.features;
        fm.edges
            .append(features.edges.points.iter().map(|p| pose.transform_point(p)), cfg.feature_voxel);
        fm.surfaces
            .append(features.surfaces.points.iter().map(|p| pose.transform_point(p)), cfg.feature_voxel);
        let center = pose.translation();
        fm.edges.prune(&center, cfg.map_window, cfg.feature_voxel);
        fm.surfaces.prune(&center, cfg.map_window, cfg.feature_voxel);
        fm.edges.rebuild();
        fm.surfaces.rebuild();

        let global = features.descriptors.iter().map(|d| d.transformed(pose)).collect();
        self.stds.push(self.scans, global, cfg);
        self.scans += 1;
    }

    /// Pairs every current feature, pre-transformed by `init`, with a map
    /// primitive. Feature points and descriptor frames stay in the sensor
    /// frame.
    pub fn find_correspondences(
        &self,
        features: &FeatureCloud,
        init: &UnitDualQuaternion,
        cfg: &MapConfig,
    ) -> Result<Correspondences, MapError> {
        let k = cfg.fit.k_neighbors;
        let edges = exec::map(&features.edges.points, |p| {
            let q = init.transform_point(p);
            let nn = self.features.edges.neighbors(&q, k, cfg.max_neighbor_distance)?;
            let line = fit_line(&nn, &cfg.fit)?;
            let off = edge_residual(init, p, &line).norm();
            (cfg.match_gate <= 0.0 || off <= cfg.match_gate).then_some(EdgeMatch { point: *p, line })
        });
        let surfaces = exec::map(&features.surfaces.points, |p| {
            let q = init.transform_point(p);
            let nn = self.features.surfaces.neighbors(&q, k, cfg.max_neighbor_distance)?;
            let plane = fit_plane(&nn, &cfg.fit)?;
            let off = plane_residual(init, p, &plane).abs();
            (cfg.match_gate <= 0.0 || off <= cfg.match_gate).then_some(PlaneMatch { point: *p, plane })
        });
        let stds = exec::map(&features.descriptors, |d| {
            let query = d.transformed(init).to_match_vector();
            self.stds.best_match(&query, cfg).map(|m| StdMatch {
                current: d.frame,
                map: m.descriptor.frame,
            })
        });
        let corr = Correspondences {
            edges: edges.into_iter().flatten().collect(),
            surfaces: surfaces.into_iter().flatten().collect(),
            stds: stds.into_iter().flatten().collect(),
        };
        if corr.is_empty() {
            return Err(MapError::NoCorrespondences);
        }
        Ok(corr)
    }

    pub fn export_std_map(&self) -> String {
        let ds: Vec<StdDescriptor> = self.stds.descriptors().iter().map(|t| t.descriptor.clone()).collect();
        dump_descriptors(&ds)
    }
}
