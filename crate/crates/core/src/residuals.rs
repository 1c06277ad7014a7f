//! Line, plane and triangle-frame primitives in dual-quaternion form and
//! the three residual families aligned by the optimizer.

use thiserror::Error;

use crate::descriptor::{mean_covariance, sorted_eigen};
use crate::dq::{quat_cross, DqError, DualQuaternion, Quaternion, UnitDualQuaternion, Vec3};
use crate::manifold::dq_log;

/// Line `l̂ = l̃ + ε m̃` with unit direction `l̃` and moment `m̃ = p̃ × l̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PluckerLine {
    pub direction: Quaternion,
    pub moment: Quaternion,
}

impl PluckerLine {
    /// Line through `point` along `direction` (normalized here).
    pub fn through(point: &Vec3, direction: &Vec3) -> Self {
        let l = Quaternion::pure(&direction.normalize());
        let m = quat_cross(&Quaternion::pure(point), &l).expect("pure operands");
        Self { direction: l, moment: m }
    }

    pub fn as_dq(&self) -> DualQuaternion {
        DualQuaternion::new(self.direction, self.moment)
    }

    pub fn direction_vector(&self) -> Vec3 {
        self.direction.vector()
    }

    pub fn moment_vector(&self) -> Vec3 {
        self.moment.vector()
    }
}

/// Plane `π̂ = ñ + ε d` with unit normal `ñ` and offset `d = ñ · p̃₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualPlane {
    pub normal: Quaternion,
    pub distance: f64,
}

impl DualPlane {
    pub fn new(normal: &Vec3, point_on_plane: &Vec3) -> Self {
        let n = normal.normalize();
        Self {
            normal: Quaternion::pure(&n),
            distance: n.dot(point_on_plane),
        }
    }

    pub fn as_dq(&self) -> DualQuaternion {
        DualQuaternion::new(self.normal, Quaternion::new(self.distance, 0.0, 0.0, 0.0))
    }

    pub fn normal_vector(&self) -> Vec3 {
        self.normal.vector()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub k_neighbors: usize,
    /// A line needs `λ_max > ratio · λ_mid`.
    pub line_eig_ratio: f64,
    /// Every plane neighbour must be within this distance of the fit.
    pub plane_inlier: f64,
    /// A plane needs `λ_mid > ratio · λ_min`, so near-collinear
    /// neighbourhoods are dropped.
    pub plane_eig_ratio: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            line_eig_ratio: 3.0,
            plane_inlier: 0.05,
            plane_eig_ratio: 100.0,
        }
    }
}

/// Principal-direction line through the neighbours' centroid, or `None`
/// for neighbourhoods that are not elongated enough.
pub fn fit_line(neighbors: &[Vec3], cfg: &FitConfig) -> Option<PluckerLine> {
    if neighbors.len() < 2 {
        return None;
    }
    let (centroid, cov) = mean_covariance(neighbors);
    let (vals, vecs) = sorted_eigen(&cov);
    if !(vals[2] > cfg.line_eig_ratio * vals[1].max(0.0)) {
        return None;
    }
    // sign: largest-magnitude component positive
    let mut dir = vecs[2];
    let imax = dir.iamax();
    if dir[imax] < 0.0 {
        dir = -dir;
    }
    Some(PluckerLine::through(&centroid, &dir))
}

/// Least-squares plane with `d >= 0`, or `None` if the neighbours are
/// collinear or any of them is farther than `plane_inlier` from the fit.
pub fn fit_plane(neighbors: &[Vec3], cfg: &FitConfig) -> Option<DualPlane> {
    if neighbors.len() < 3 {
        return None;
    }
    let (centroid, cov) = mean_covariance(neighbors);
    let (vals, vecs) = sorted_eigen(&cov);
    if !(vals[1] > 1e-12 * vals[2].max(f64::MIN_POSITIVE)) || !(vals[1] >= cfg.plane_eig_ratio * vals[0]) {
        return None;
    }
    let mut n = vecs[0];
    if n.dot(&centroid) < 0.0 {
        n = -n;
    }
    let plane = DualPlane::new(&n, &centroid);
    let fits = neighbors
        .iter()
        .all(|p| (n.dot(p) - plane.distance).abs() <= cfg.plane_inlier);
    fits.then_some(plane)
}

/// `(𝒟(q̂ ⊠ p̂ ⊠ q̂^{3*}) × l̃) − m̃`; its norm is the point-to-line distance.
pub fn edge_residual(pose: &UnitDualQuaternion, point: &Vec3, line: &PluckerLine) -> Vec3 {
    let moved = Quaternion::pure(&pose.transform_point(point));
    let c = quat_cross(&moved, &line.direction).expect("pure operands");
    (c - line.moment).vector()
}

/// Signed distance `ñ · 𝒟(q̂ ⊠ p̂ ⊠ q̂^{3*}) − d`.
pub fn plane_residual(pose: &UnitDualQuaternion, point: &Vec3, plane: &DualPlane) -> f64 {
    plane.normal_vector().dot(&pose.transform_point(point)) - plane.distance
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StdWeights {
    pub rotation: f64,
    pub translation: f64,
}

impl Default for StdWeights {
    fn default() -> Self {
        Self {
            rotation: 1.0,
            translation: 1.0,
        }
    }
}

/// Tangent-space distance of `m̂^{2*} ⊠ q̂ ⊠ ĉ` from the identity, as the
/// weighted 6-vector `[omega; nu]`.
pub fn std_residual(
    pose: &UnitDualQuaternion,
    current: &UnitDualQuaternion,
    map: &UnitDualQuaternion,
    weights: &StdWeights,
) -> Result<[f64; 6], DqError> {
    let error = map.inverse() * *pose * *current;
    let v = dq_log(&error)?;
    Ok([
        v.omega.x * weights.rotation,
        v.omega.y * weights.rotation,
        v.omega.z * weights.rotation,
        v.nu.x * weights.translation,
        v.nu.y * weights.translation,
        v.nu.z * weights.translation,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RobustLoss {
    Trivial,
    Huber(f64),
}

impl RobustLoss {
    /// `ρ(s)` of a squared norm `s`.
    pub fn rho(&self, s: f64) -> f64 {
        match *self {
            RobustLoss::Trivial => s,
            RobustLoss::Huber(d) => {
                if s <= d * d {
                    s
                } else {
                    2.0 * d * s.sqrt() - d * d
                }
            }
        }
    }

    /// `ρ'(s)`, the IRLS weight.
    pub fn weight(&self, s: f64) -> f64 {
        match *self {
            RobustLoss::Trivial => 1.0,
            RobustLoss::Huber(d) => {
                if s <= d * d {
                    1.0
                } else {
                    d / s.sqrt()
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualConfig {
    /// Loss on edge and surface terms.
    pub feature_loss: RobustLoss,
    pub std_weights: StdWeights,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        Self {
            feature_loss: RobustLoss::Huber(0.5),
            std_weights: StdWeights::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeMatch {
    pub point: Vec3,
    pub line: PluckerLine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneMatch {
    pub point: Vec3,
    pub plane: DualPlane,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StdMatch {
    /// Descriptor frame in the sensor frame.
    pub current: UnitDualQuaternion,
    /// Matched map descriptor frame in the global frame.
    pub map: UnitDualQuaternion,
}

/// Current-scan features (sensor frame) paired with map primitives
/// (global frame).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Correspondences {
    pub edges: Vec<EdgeMatch>,
    pub surfaces: Vec<PlaneMatch>,
    pub stds: Vec<StdMatch>,
}

impl Correspondences {
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty() && self.surfaces.is_empty() && self.stds.is_empty()
    }

    pub fn block_count(&self) -> usize {
        self.edges.len() + self.surfaces.len() + self.stds.len()
    }

    /// Scalar residual rows: 3 per edge, 1 per surface, 6 per descriptor.
    pub fn row_count(&self) -> usize {
        3 * self.edges.len() + self.surfaces.len() + 6 * self.stds.len()
    }

    /// Residual blocks in evaluation order: edges, surfaces, descriptors.
    pub fn block(&self, i: usize) -> Block<'_> {
        let (ne, ns) = (self.edges.len(), self.surfaces.len());
        if i < ne {
            Block::Edge(&self.edges[i])
        } else if i < ne + ns {
            Block::Surface(&self.surfaces[i - ne])
        } else {
            Block::Std(&self.stds[i - ne - ns])
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Block<'a> {
    Edge(&'a EdgeMatch),
    Surface(&'a PlaneMatch),
    Std(&'a StdMatch),
}

/// Up to six residual values of one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockResidual {
    pub values: [f64; 6],
    pub dim: usize,
}

impl BlockResidual {
    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.dim]
    }

    pub fn squared_norm(&self) -> f64 {
        self.as_slice().iter().map(|v| v * v).sum()
    }
}

impl Block<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Block::Edge(_) => 3,
            Block::Surface(_) => 1,
            Block::Std(_) => 6,
        }
    }

    pub fn loss(&self, cfg: &ResidualConfig) -> RobustLoss {
        match self {
            Block::Std(_) => RobustLoss::Trivial,
            _ => cfg.feature_loss,
        }
    }

    pub fn evaluate(&self, pose: &UnitDualQuaternion, cfg: &ResidualConfig) -> Result<BlockResidual, DqError> {
        let mut values = [0.0; 6];
        match self {
            Block::Edge(m) => {
                let r = edge_residual(pose, &m.point, &m.line);
                values[..3].copy_from_slice(r.as_slice());
            }
            Block::Surface(m) => values[0] = plane_residual(pose, &m.point, &m.plane),
            Block::Std(m) => values = std_residual(pose, &m.current, &m.map, &cfg.std_weights)?,
        }
        Ok(BlockResidual {
            values,
            dim: self.dim(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("no correspondences to evaluate")]
    Empty,
    #[error(transparent)]
    Dq(#[from] DqError),
}

/// `Σ ρ(‖r‖²)` over all blocks, summed in block order.
pub fn total_cost(
    pose: &UnitDualQuaternion,
    corr: &Correspondences,
    cfg: &ResidualConfig,
) -> Result<f64, CostError> {
    if corr.is_empty() {
        return Err(CostError::Empty);
    }
    let costs = crate::exec::map_range(corr.block_count(), |i| {
        let b = corr.block(i);
        b.evaluate(pose, cfg).map(|r| b.loss(cfg).rho(r.squared_norm()))
    });
    let mut sum = 0.0;
    for c in costs {
        sum += c?;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dq::RigidTransform;

    #[test]
    fn collinear_line_fit() {
        let pts: Vec<Vec3> = (0..5).map(|i| Vec3::new(1.0, 2.0, i as f64 * 0.3)).collect();
        let l = fit_line(&pts, &FitConfig::default()).unwrap();
        assert!((l.direction_vector() - Vec3::z()).norm() < 1e-12);
        let c = Vec3::new(1.0, 2.0, 0.6);
        assert!((l.moment_vector() - c.cross(&Vec3::z())).norm() < 1e-12);
        // Plücker constraint
        assert!(l.direction_vector().dot(&l.moment_vector()).abs() < 1e-12);
    }

    #[test]
    fn circle_is_not_a_line() {
        let pts: Vec<Vec3> = (0..5)
            .map(|i| {
                let a = i as f64 * 2.0 * std::f64::consts::PI / 5.0;
                Vec3::new(a.cos(), a.sin(), 0.0)
            })
            .collect();
        assert!(fit_line(&pts, &FitConfig::default()).is_none());
    }

    #[test]
    fn plane_fit_examples() {
        let cfg = FitConfig::default();
        let flat = [
            Vec3::new(0.0, 0.0, 2.0),
            Vec3::new(1.0, 0.0, 2.0),
            Vec3::new(0.0, 1.0, 2.0),
            Vec3::new(1.0, 1.0, 2.0),
            Vec3::new(0.5, 0.2, 2.0),
        ];
        let p = fit_plane(&flat, &cfg).unwrap();
        assert!((p.normal_vector() - Vec3::z()).norm() < 1e-12);
        assert!((p.distance - 2.0).abs() < 1e-12);

        let mut outlier = flat;
        outlier[4].z += 0.1;
        assert!(fit_plane(&outlier, &cfg).is_none());

        let tilted = [
            Vec3::new(3.0, 0.0, 0.0),
            Vec3::new(0.0, 3.0, 0.0),
            Vec3::new(0.0, 0.0, 3.0),
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(2.0, 0.5, 0.5),
        ];
        let p = fit_plane(&tilted, &cfg).unwrap();
        assert!((p.normal_vector() - Vec3::new(1.0, 1.0, 1.0) / 3f64.sqrt()).norm() < 1e-6);
        assert!((p.distance - 3.0 / 3f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn edge_residual_examples() {
        let z_axis = PluckerLine::through(&Vec3::zeros(), &Vec3::z());
        let r = edge_residual(&UnitDualQuaternion::IDENTITY, &Vec3::x(), &z_axis);
        assert!((r.norm() - 1.0).abs() < 1e-15);
        let on = edge_residual(&UnitDualQuaternion::IDENTITY, &Vec3::new(0.0, 0.0, 4.0), &z_axis);
        assert_eq!(on.norm(), 0.0);
    }

    #[test]
    fn plane_residual_example() {
        let plane = DualPlane::new(&Vec3::z(), &Vec3::new(0.0, 0.0, 1.0));
        let pose = UnitDualQuaternion::from_translation(Vec3::new(4.0, 5.0, 2.0));
        assert!((plane_residual(&pose, &Vec3::new(1.0, 0.0, 1.0), &plane) - 2.0).abs() < 1e-15);
        assert_eq!(plane_residual(&UnitDualQuaternion::IDENTITY, &Vec3::new(7.0, -3.0, 1.0), &plane), 0.0);
    }

    #[test]
    fn std_residual_examples() {
        let w = StdWeights::default();
        let current = RigidTransform::from_axis_angle(&Vec3::new(1.0, 1.0, 0.0), 0.4, Vec3::new(1.0, 2.0, 3.0)).to_unit_dq();
        let pose = RigidTransform::from_axis_angle(&Vec3::z(), 0.2, Vec3::new(0.5, 0.0, 0.0)).to_unit_dq();
        let map = pose * current;
        let r = std_residual(&pose, &current, &map, &w).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-15));

        let offset = UnitDualQuaternion::from_translation(Vec3::new(0.1, 0.0, 0.0));
        let map = current * offset;
        let r = std_residual(&UnitDualQuaternion::IDENTITY, &current, &map, &w).unwrap();
        assert!(r[..3].iter().all(|v| v.abs() < 1e-15));
        assert!((r[3].abs() - 0.1).abs() < 1e-12 && r[4].abs() < 1e-12 && r[5].abs() < 1e-12);

        let flipped = std_residual(&pose, &current, &map.negated(), &w).unwrap();
        assert_eq!(flipped, std_residual(&pose, &current, &map, &w).unwrap());
    }

    #[test]
    fn cost_examples() {
        let cfg = ResidualConfig {
            feature_loss: RobustLoss::Trivial,
            ..ResidualConfig::default()
        };
        assert_eq!(
            total_cost(&UnitDualQuaternion::IDENTITY, &Correspondences::default(), &cfg),
            Err(CostError::Empty)
        );
        let corr = Correspondences {
            surfaces: vec![PlaneMatch {
                point: Vec3::new(5.0, 5.0, 3.0),
                plane: DualPlane::new(&Vec3::z(), &Vec3::new(0.0, 0.0, 1.0)),
            }],
            ..Default::default()
        };
        assert_eq!(total_cost(&UnitDualQuaternion::IDENTITY, &corr, &cfg).unwrap(), 4.0);
        // Huber tail is linear
        let huber = ResidualConfig::default();
        assert!((total_cost(&UnitDualQuaternion::IDENTITY, &corr, &huber).unwrap() - (2.0 * 0.5 * 2.0 - 0.25)).abs() < 1e-15);
    }
}
