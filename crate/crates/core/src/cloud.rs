use crate::dq::{UnitDualQuaternion, Vec3};

/// A LiDAR scan or feature set, in meters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub intensity: Option<Vec<f32>>,
    /// Beam index per point, when the source knows it.
    pub ring: Option<Vec<u16>>,
}

impl PointCloud {
    /// Builds a cloud, dropping points with non-finite coordinates.
    pub fn from_points(points: Vec<Vec3>) -> Self {
        let points = points.into_iter().filter(|p| p.iter().all(|c| c.is_finite())).collect();
        Self {
            points,
            intensity: None,
            ring: None,
        }
    }

    /// Builds a cloud with per-point attributes, dropping non-finite rows.
    pub fn with_attributes(points: Vec<Vec3>, intensity: Option<Vec<f32>>, ring: Option<Vec<u16>>) -> Self {
        let keep: Vec<bool> = points.iter().map(|p| p.iter().all(|c| c.is_finite())).collect();
        Self {
            intensity: intensity.map(|v| keep_rows(v, &keep)),
            ring: ring.map(|v| keep_rows(v, &keep)),
            points: keep_rows(points, &keep),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Subset by source indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            intensity: self.intensity.as_ref().map(|v| indices.iter().map(|&i| v[i]).collect()),
            ring: self.ring.as_ref().map(|v| indices.iter().map(|&i| v[i]).collect()),
        }
    }

    pub fn transformed(&self, pose: &UnitDualQuaternion) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| pose.transform_point(p)).collect(),
            intensity: self.intensity.clone(),
            ring: self.ring.clone(),
        }
    }

    pub fn to_arrays(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(|p| [p.x, p.y, p.z]).collect()
    }
}

/// Integer voxel key of a point.
fn keep_rows<T>(v: Vec<T>, keep: &[bool]) -> Vec<T> {
    v.into_iter().zip(keep).filter(|(_, k)| **k).map(|(x, _)| x).collect()
}

pub fn voxel_key(p: &Vec3, size: f64) -> (i64, i64, i64) {
    (
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    )
}

/// Keeps the first point (in input order) of every occupied voxel and
/// returns the kept indices in input order. `size <= 0` keeps everything.
pub fn voxel_downsample_indices(points: &[Vec3], size: f64) -> Vec<usize> {
    if !(size > 0.0) {
        return (0..points.len()).collect();
    }
    let mut seen = std::collections::HashSet::with_capacity(points.len());
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| seen.insert(voxel_key(p, size)))
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_rows_dropped() {
        let c = PointCloud::with_attributes(
            vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(f64::NAN, 0.0, 0.0), Vec3::new(0.0, 2.0, 0.0)],
            Some(vec![0.1, 0.2, 0.3]),
            None,
        );
        assert_eq!(c.len(), 2);
        assert_eq!(c.intensity.unwrap(), vec![0.1, 0.3]);
    }

    #[test]
    fn downsample_one_per_voxel() {
        let pts: Vec<Vec3> = (0..100).map(|i| Vec3::new(i as f64 * 0.01, 0.0, 0.0)).collect();
        let kept = voxel_downsample_indices(&pts, 0.25);
        assert_eq!(kept, vec![0, 25, 50, 75]);
        assert_eq!(voxel_downsample_indices(&pts, 0.0).len(), 100);
    }
}
