//! Stable Triangle Descriptors with a per-triangle reference frame.
//!
//! Extraction runs in three steps: planar voxels (with leftover points
//! attached to a neighbouring plane), clustering of planes with similar
//! normals into vertices, and enumeration of vertex triangles.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use nalgebra::{Matrix3, SymmetricEigen};

use crate::cloud::{voxel_key, PointCloud};
use crate::dq::{RigidTransform, UnitDualQuaternion, Vec3};
use crate::exec;

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorConfig {
    pub voxel_size: f64,
    pub min_points: usize,
    /// A voxel is planar when `λ_min / λ_mid` is below this.
    pub planarity_threshold: f64,
    /// Points of non-planar voxels join a neighbouring plane within this distance.
    pub attach_distance: f64,
    pub normal_merge_angle_deg: f64,
    /// Planes whose centres are closer than this may share a vertex.
    pub cluster_radius: f64,
    /// Two planes share a vertex only if their offsets along the normal
    /// differ by less than this.
    pub coplanar_tolerance: f64,
    /// Clusters whose RMS spread along their widest axis exceeds this are
    /// not compact enough to be a key point.
    pub max_vertex_extent: f64,
    pub max_vertices: usize,
    pub min_side: f64,
    pub max_side: f64,
    pub min_area: f64,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            voxel_size: 1.0,
            min_points: 10,
            planarity_threshold: 0.1,
            attach_distance: 0.05,
            normal_merge_angle_deg: 8.0,
            cluster_radius: 1.5,
            coplanar_tolerance: 0.1,
            max_vertex_extent: 1.0,
            max_vertices: 10,
            min_side: 1.0,
            max_side: 50.0,
            min_area: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub points: Vec<Vec3>,
    /// Unit normal, oriented toward the sensor origin.
    pub normal: Vec3,
    pub center: Vec3,
}

impl Plane {
    pub fn support(&self) -> usize {
        self.points.len()
    }
}

/// Mean and covariance of a point set.
pub fn mean_covariance(points: &[Vec3]) -> (Vec3, Matrix3<f64>) {
    let n = points.len() as f64;
    let mean = points.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let cov = points.iter().fold(Matrix3::zeros(), |a, p| {
        let d = p - mean;
        a + d * d.transpose()
    }) / n;
    (mean, cov)
}

/// Eigenvalues in ascending order with matching unit eigenvectors.
pub fn sorted_eigen(cov: &Matrix3<f64>) -> ([f64; 3], [Vec3; 3]) {
    let eig = SymmetricEigen::new(*cov);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.map(|i| eig.eigenvalues[i]);
    let vecs = idx.map(|i| eig.eigenvectors.column(i).into_owned().normalize());
    (vals, vecs)
}

fn orient_toward_origin(normal: Vec3, center: &Vec3) -> Vec3 {
    if normal.dot(&(-center)) < 0.0 {
        -normal
    } else {
        normal
    }
}

type VoxelKey = (i64, i64, i64);

pub fn extract_planes(cloud: &PointCloud, cfg: &DescriptorConfig) -> Vec<Plane> {
    assert!(cfg.voxel_size > 0.0, "voxel size must be positive");
    let mut voxels: BTreeMap<VoxelKey, Vec<Vec3>> = BTreeMap::new();
    for p in &cloud.points {
        voxels.entry(voxel_key(p, cfg.voxel_size)).or_default().push(*p);
    }
    let entries: Vec<(&VoxelKey, &Vec<Vec3>)> = voxels.iter().collect();
    let fitted = exec::map(&entries, |(_, pts)| {
        if pts.len() < cfg.min_points {
            return None;
        }
        let (center, cov) = mean_covariance(pts);
        let (vals, vecs) = sorted_eigen(&cov);
        if !(vals[1] > 0.0) || vals[0].max(0.0) / vals[1] >= cfg.planarity_threshold {
            return None;
        }
        Some((center, orient_toward_origin(vecs[0], &center)))
    });

    let mut planes: Vec<Plane> = Vec::new();
    let mut plane_of_voxel: HashMap<VoxelKey, usize> = HashMap::new();
    for ((key, pts), fit) in entries.iter().zip(fitted.iter()) {
        if let Some((center, normal)) = fit {
            plane_of_voxel.insert(**key, planes.len());
            planes.push(Plane {
                points: (*pts).clone(),
                normal: *normal,
                center: *center,
            });
        }
    }

    // leftover points join the closest neighbouring plane
    let mut attached: Vec<Vec<Vec3>> = vec![Vec::new(); planes.len()];
    for ((key, pts), fit) in entries.iter().zip(fitted.iter()) {
        if fit.is_some() {
            continue;
        }
        for p in pts.iter() {
            let mut best: Option<(f64, usize)> = None;
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let k = (key.0 + dx, key.1 + dy, key.2 + dz);
                        if let Some(&pi) = plane_of_voxel.get(&k) {
                            let d = planes[pi].normal.dot(&(p - planes[pi].center)).abs();
                            if d < cfg.attach_distance && best.is_none_or(|(bd, bi)| d < bd || (d == bd && pi < bi)) {
                                best = Some((d, pi));
                            }
                        }
                    }
                }
            }
            if let Some((_, pi)) = best {
                attached[pi].push(*p);
            }
        }
    }
    for (plane, extra) in planes.iter_mut().zip(attached) {
        if extra.is_empty() {
            continue;
        }
        plane.points.extend(extra);
        let (center, cov) = mean_covariance(&plane.points);
        let (_, vecs) = sorted_eigen(&cov);
        plane.center = center;
        plane.normal = orient_toward_origin(vecs[0], &center);
    }
    planes
}

/// A triangle corner: the centroid of a cluster of similar planes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub position: Vec3,
    pub normal: Vec3,
    pub support: usize,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

pub fn extract_vertices(planes: &[Plane], cfg: &DescriptorConfig) -> Vec<Vertex> {
    let cos_limit = cfg.normal_merge_angle_deg.to_radians().cos();
    let n = planes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (&planes[i], &planes[j]);
            if a.normal.dot(&b.normal) < cos_limit {
                continue;
            }
            let gap = b.center - a.center;
            if gap.norm() > cfg.cluster_radius || a.normal.dot(&gap).abs() > cfg.coplanar_tolerance {
                continue;
            }
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        clusters.entry(r).or_default().push(i);
    }

    let mut vertices: Vec<Vertex> = clusters
        .values()
        .filter_map(|members| {
            let points: Vec<Vec3> = members.iter().flat_map(|&i| planes[i].points.iter().copied()).collect();
            let (position, cov) = mean_covariance(&points);
            let (vals, _) = sorted_eigen(&cov);
            if vals[2].max(0.0).sqrt() > cfg.max_vertex_extent {
                return None;
            }
            let normal = members
                .iter()
                .fold(Vec3::zeros(), |acc, &i| acc + planes[i].normal * planes[i].support() as f64)
                .normalize();
            Some(Vertex {
                position,
                normal,
                support: points.len(),
            })
        })
        .collect();
    vertices.sort_by(|a, b| {
        b.support.cmp(&a.support).then_with(|| {
            a.position
                .iter()
                .zip(b.position.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    vertices.truncate(cfg.max_vertices);
    vertices
}

#[derive(Debug, Clone, PartialEq)]
pub struct StdDescriptor {
    /// Ordered so that `l12 <= l23 <= l13`.
    pub vertices: [Vec3; 3],
    pub normals: [Vec3; 3],
    /// `(l12, l23, l13)`
    pub sides: [f64; 3],
    pub centroid: Vec3,
    /// Pose of the triangle frame in the source frame.
    pub frame: UnitDualQuaternion,
    /// Plane support of each vertex.
    pub support: [usize; 3],
}

fn lex_cmp(a: &[Vec3; 3], b: &[Vec3; 3]) -> std::cmp::Ordering {
    a.iter()
        .flat_map(|v| v.iter())
        .zip(b.iter().flat_map(|v| v.iter()))
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Frame at the centroid: `t_x` toward `v3`, `t_y` along `v2 − v1`
/// re-orthogonalized, `t_z = t_x × t_y`.
pub fn triangle_frame(v: &[Vec3; 3]) -> Option<RigidTransform> {
    let c = (v[0] + v[1] + v[2]) / 3.0;
    let tx = (v[2] - c).try_normalize(1e-12)?;
    let ty0 = (v[1] - v[0]).try_normalize(1e-12)?;
    let tz = tx.cross(&ty0).try_normalize(1e-12)?;
    let ty = tz.cross(&tx);
    let r = Matrix3::from_columns(&[tx, ty, tz]);
    Some(RigidTransform::from_matrix(&r, c))
}

impl StdDescriptor {
    /// Builds a descriptor from three vertices in any order; relabels them so
    /// that `l12 <= l23 <= l13`, breaking ties by lexicographic coordinates.
    pub fn from_vertices(vertices: [Vec3; 3], normals: [Vec3; 3], support: [usize; 3]) -> Option<Self> {
        let side = |v: &[Vec3; 3]| [(v[0] - v[1]).norm(), (v[1] - v[2]).norm(), (v[0] - v[2]).norm()];
        let mut best: Option<[usize; 3]> = None;
        for perm in PERMUTATIONS {
            let v = perm.map(|i| vertices[i]);
            let s = side(&v);
            if s[0] <= s[1] && s[1] <= s[2] {
                let better = match best {
                    None => true,
                    Some(b) => lex_cmp(&v, &b.map(|i| vertices[i])).is_lt(),
                };
                if better {
                    best = Some(perm);
                }
            }
        }
        let perm = best?;
        let v = perm.map(|i| vertices[i]);
        let frame = triangle_frame(&v)?;
        Some(Self {
            vertices: v,
            normals: perm.map(|i| normals[i]),
            sides: side(&v),
            centroid: (v[0] + v[1] + v[2]) / 3.0,
            frame: frame.to_unit_dq(),
            support: perm.map(|i| support[i]),
        })
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.vertices[1] - self.vertices[0])
            .cross(&(self.vertices[2] - self.vertices[0]))
            .norm()
    }

    /// Moves the descriptor by `pose`: vertices and centroid transformed,
    /// normals rotated, frame composed on the left.
    pub fn transformed(&self, pose: &UnitDualQuaternion) -> Self {
        let r = pose.rotation();
        Self {
            vertices: self.vertices.map(|v| pose.transform_point(&v)),
            normals: self.normals.map(|n| r.rotate(&n)),
            sides: self.sides,
            centroid: pose.transform_point(&self.centroid),
            frame: *pose * self.frame,
            support: self.support,
        }
    }

    pub fn to_match_vector(&self) -> MatchVector24 {
        let mut a = [0.0; 24];
        for k in 0..3 {
            a[3 * k..3 * k + 3].copy_from_slice(self.vertices[k].as_slice());
            a[9 + 3 * k..9 + 3 * k + 3].copy_from_slice(self.normals[k].as_slice());
        }
        a[18..21].copy_from_slice(&self.sides);
        a[21..24].copy_from_slice(self.centroid.as_slice());
        MatchVector24(a)
    }
}

/// `[v1, v2, v3, n1, n2, n3, l12, l23, l13, centroid]`, 24 scalars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchVector24(pub [f64; 24]);

impl MatchVector24 {
    pub const LEN: usize = 24;
    pub const VERTICES: std::ops::Range<usize> = 0..9;
    pub const NORMALS: std::ops::Range<usize> = 9..18;
    pub const SIDES: std::ops::Range<usize> = 18..21;
    pub const CENTROID: std::ops::Range<usize> = 21..24;

    pub fn block_distance(&self, other: &Self, block: std::ops::Range<usize>) -> f64 {
        block.map(|i| (self.0[i] - other.0[i]).powi(2)).sum::<f64>().sqrt()
    }

    fn vec3(&self, at: usize) -> Vec3 {
        Vec3::new(self.0[at], self.0[at + 1], self.0[at + 2])
    }

    /// Rebuilds the descriptor from its vector; the stored labeling is kept
    /// and the frame recomputed from the vertices. Plane support is not part
    /// of the vector and comes back as zero.
    pub fn to_descriptor(&self) -> Option<StdDescriptor> {
        let vertices = [self.vec3(0), self.vec3(3), self.vec3(6)];
        let frame = triangle_frame(&vertices)?;
        Some(StdDescriptor {
            vertices,
            normals: [self.vec3(9), self.vec3(12), self.vec3(15)],
            sides: [self.0[18], self.0[19], self.0[20]],
            centroid: self.vec3(21),
            frame: frame.to_unit_dq(),
            support: [0; 3],
        })
    }

    /// One dump line: 24 whitespace-separated decimals, printed in shortest
    /// round-trip form so the line parses back to the same bits.
    pub fn to_line(&self) -> String {
        let mut s = String::with_capacity(24 * 14);
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            write!(s, "{v}").unwrap();
        }
        s
    }

    pub fn parse_line(line: &str) -> Option<Self> {
        let vals: Vec<f64> = line.split_whitespace().map(|t| t.parse().ok()).collect::<Option<_>>()?;
        let arr: [f64; 24] = vals.try_into().ok()?;
        Some(Self(arr))
    }
}

/// All triangles of the vertex set that pass the side and area bounds, in
/// ascending `(i, j, k)` vertex-index order.
pub fn build_descriptors(vertices: &[Vertex], cfg: &DescriptorConfig) -> Vec<StdDescriptor> {
    let n = vertices.len();
    let mut triples = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                triples.push([i, j, k]);
            }
        }
    }
    exec::map(&triples, |t| {
        let v = t.map(|i| vertices[i].position);
        let sides = [(v[0] - v[1]).norm(), (v[1] - v[2]).norm(), (v[0] - v[2]).norm()];
        if sides.iter().any(|s| *s < cfg.min_side || *s > cfg.max_side) {
            return None;
        }
        let d = StdDescriptor::from_vertices(v, t.map(|i| vertices[i].normal), t.map(|i| vertices[i].support))?;
        (d.area() >= cfg.min_area).then_some(d)
    })
    .into_iter()
    .flatten()
    .collect()
}

pub fn extract_descriptors(cloud: &PointCloud, cfg: &DescriptorConfig) -> Vec<StdDescriptor> {
    let planes = extract_planes(cloud, cfg);
    let vertices = extract_vertices(&planes, cfg);
    build_descriptors(&vertices, cfg)
}

/// The descriptor dump: one match vector per line.
pub fn dump_descriptors(descriptors: &[StdDescriptor]) -> String {
    let mut s = String::new();
    for d in descriptors {
        s.push_str(&d.to_match_vector().to_line());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn vertex(x: f64, y: f64, z: f64) -> Vertex {
        Vertex {
            position: Vec3::new(x, y, z),
            normal: Vec3::z(),
            support: 20,
        }
    }

    #[test]
    fn coplanar_voxel_gives_one_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = Vec3::new(1.0, 2.0, 2.0).normalize();
        let u = n.cross(&Vec3::x()).normalize();
        let w = n.cross(&u);
        let c = Vec3::new(5.5, 5.5, 5.5);
        let pts = (0..100)
            .map(|_| c + u * rng.random_range(-0.3..0.3) + w * rng.random_range(-0.3..0.3))
            .collect();
        let planes = extract_planes(&PointCloud::from_points(pts), &DescriptorConfig::default());
        assert_eq!(planes.len(), 1);
        assert!((planes[0].normal.dot(&n).abs() - 1.0).abs() < 1e-6);
        // faces the origin
        assert!(planes[0].normal.dot(&planes[0].center) < 0.0);
    }

    #[test]
    fn gaussian_blob_is_not_planar() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = Normal::new(0.0, 0.08).unwrap();
        let c = Vec3::new(3.5, -2.5, 0.5);
        let pts = (0..500)
            .map(|_| c + Vec3::new(g.sample(&mut rng), g.sample(&mut rng), g.sample(&mut rng)))
            .collect();
        assert!(extract_planes(&PointCloud::from_points(pts), &DescriptorConfig::default()).is_empty());
    }

    #[test]
    fn orthogonal_walls() {
        let mut pts = Vec::new();
        for i in 0..15 {
            for j in 0..15 {
                let a = 0.05 + i as f64 * 0.06;
                let b = 0.05 + j as f64 * 0.06;
                pts.push(Vec3::new(4.02, a, b)); // wall x = 4.02 in voxel x=4
                pts.push(Vec3::new(2.0 + a, 1.98, b)); // wall y = 1.98 in voxel y=1
            }
        }
        let planes = extract_planes(&PointCloud::from_points(pts), &DescriptorConfig::default());
        assert_eq!(planes.len(), 2);
        let angle = planes[0].normal.dot(&planes[1].normal).clamp(-1.0, 1.0).acos().to_degrees();
        assert!((angle - 90.0).abs() < 1.0, "{angle}");
    }

    fn plane_with(center: Vec3, normal: Vec3, n: usize) -> Plane {
        Plane {
            points: vec![center; n],
            normal,
            center,
        }
    }

    #[test]
    fn vertex_merging() {
        let cfg = DescriptorConfig::default();
        let one = extract_vertices(&[plane_with(Vec3::new(1.0, 2.0, 3.0), Vec3::z(), 12)], &cfg);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].position, Vec3::new(1.0, 2.0, 3.0));

        let two = extract_vertices(
            &[
                plane_with(Vec3::new(1.0, 2.0, 3.0), Vec3::z(), 10),
                plane_with(Vec3::new(1.4, 2.0, 3.0), Vec3::z(), 10),
            ],
            &cfg,
        );
        assert_eq!(two.len(), 1);
        assert!((two[0].position - Vec3::new(1.2, 2.0, 3.0)).norm() < 1e-12);
        assert_eq!(two[0].support, 20);
    }

    #[test]
    fn vertex_cap_keeps_best_supported() {
        let planes: Vec<Plane> = (0..12)
            .map(|i| plane_with(Vec3::new(5.0 * i as f64, 0.0, 0.0), Vec3::z(), 10 + i))
            .collect();
        let v = extract_vertices(&planes, &DescriptorConfig::default());
        assert_eq!(v.len(), 10);
        assert_eq!(v[0].support, 21);
        assert_eq!(v[9].support, 12);
    }

    #[test]
    fn ten_vertices_give_120_triangles() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let verts: Vec<Vertex> = (0..10)
            .map(|_| vertex(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-3.0..3.0)))
            .collect();
        let d = build_descriptors(&verts, &DescriptorConfig::default());
        assert_eq!(d.len(), 120);
        for x in &d {
            assert!(x.sides[0] <= x.sides[1] && x.sides[1] <= x.sides[2]);
        }
    }

    #[test]
    fn three_four_five() {
        // given in scrambled order
        let d = StdDescriptor::from_vertices(
            [Vec3::new(3.0, 4.0, 0.0), Vec3::new(0.0, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0)],
            [Vec3::z(); 3],
            [1, 2, 3],
        )
        .unwrap();
        assert_eq!(d.vertices, [Vec3::zeros(), Vec3::new(3.0, 0.0, 0.0), Vec3::new(3.0, 4.0, 0.0)]);
        assert_eq!(d.sides, [3.0, 4.0, 5.0]);
        assert_eq!(d.support, [2, 3, 1]);
        assert!((d.centroid - Vec3::new(2.0, 4.0 / 3.0, 0.0)).norm() < 1e-15);
        // hand oracle: t_x = (3,8,0)/√73, t_y = (8,−3,0)/√73, t_z = (0,0,−1)
        let s = 73f64.sqrt();
        let r = d.frame.to_rigid().rotation_matrix();
        let expect = Matrix3::from_columns(&[
            Vec3::new(3.0 / s, 8.0 / s, 0.0),
            Vec3::new(8.0 / s, -3.0 / s, 0.0),
            Vec3::new(0.0, 0.0, -1.0),
        ]);
        assert!((r - expect).abs().max() < 1e-12);
        assert!((d.frame.translation() - d.centroid).norm() < 1e-12);
    }

    #[test]
    fn equilateral_triangle() {
        let h = 3f64.sqrt() / 2.0;
        let d = StdDescriptor::from_vertices(
            [Vec3::new(0.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0), Vec3::new(1.0, 2.0 * h, 0.0)],
            [Vec3::z(); 3],
            [1; 3],
        )
        .unwrap();
        assert!((d.sides[0] - d.sides[2]).abs() < 1e-12);
        let r = d.frame.to_rigid().rotation_matrix();
        assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_triangles_skipped() {
        let verts = [vertex(0.0, 0.0, 0.0), vertex(2.0, 0.0, 0.0), vertex(5.0, 0.0, 0.0)];
        assert!(build_descriptors(&verts, &DescriptorConfig::default()).is_empty());
    }

    #[test]
    fn match_vector_layout() {
        let d = StdDescriptor::from_vertices(
            [Vec3::new(0.0, 0.0, 1.0), Vec3::new(3.0, 0.0, 1.0), Vec3::new(3.0, 4.0, 1.0)],
            [Vec3::x(), Vec3::y(), Vec3::z()],
            [1; 3],
        )
        .unwrap();
        let m = d.to_match_vector();
        assert_eq!(m.0.len(), MatchVector24::LEN);
        assert_eq!(&m.0[MatchVector24::SIDES], &[3.0, 4.0, 5.0]);
        let back = m.to_descriptor().unwrap();
        assert_eq!(back.vertices, d.vertices);
        assert_eq!(back.normals, d.normals);
        assert_eq!(back.sides, d.sides);
        assert_eq!(back.centroid, d.centroid);
        assert!(back.frame.as_dq().max_abs_diff(d.frame.as_dq()) < 1e-12);

        let moved = d.transformed(&UnitDualQuaternion::from_rotation_translation(
            crate::dq::Quaternion::from_axis_angle(&Vec3::z(), 0.5),
            Vec3::new(10.0, 0.0, 0.0),
        ));
        let mm = moved.to_match_vector();
        assert_eq!(&mm.0[MatchVector24::SIDES], &m.0[MatchVector24::SIDES]);
        assert!(mm.block_distance(&m, MatchVector24::VERTICES) > 1.0);

        let line = m.to_line();
        assert_eq!(line.split_whitespace().count(), 24);
        assert_eq!(MatchVector24::parse_line(&line).unwrap(), m);
    }
}
