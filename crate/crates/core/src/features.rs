//! Spherical range image and Sobel-based edge/surface classification.

use std::f64::consts::PI;

use thiserror::Error;

use crate::cloud::PointCloud;
use crate::descriptor::{mean_covariance, sorted_eigen, StdDescriptor};
use crate::exec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("range image must be at least 8x8, got {rows}x{cols}")]
    ImageTooSmall { rows: usize, cols: usize },
    #[error("vertical field of view is empty ({up} deg up, {down} deg down)")]
    EmptyFieldOfView { up: f64, down: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SriConfig {
    pub rows: usize,
    pub cols: usize,
    /// Upper edge of the vertical field of view, degrees.
    pub fov_up_deg: f64,
    /// Lower edge of the vertical field of view, degrees.
    pub fov_down_deg: f64,
}

impl Default for SriConfig {
    fn default() -> Self {
        Self {
            rows: 64,
            cols: 1024,
            fov_up_deg: 2.0,
            fov_down_deg: -24.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub sri: SriConfig,
    /// Sobel magnitude (m/bin) above which a cell is an edge candidate.
    pub edge_threshold: f64,
    /// Sobel magnitude (m/bin) below which a cell is a surface candidate.
    pub surface_threshold: f64,
    /// Number of equal azimuth segments per row for the edge cap.
    pub edge_segments: usize,
    pub max_edges_per_segment: usize,
    pub min_valid_neighbors: usize,
    /// Edge candidates whose 3x3 neighbourhood is a plane to within this
    /// ratio (out-of-plane over in-plane spread) are smooth ramps, such as
    /// a floor seen at grazing incidence, and are dropped.
    pub ramp_flatness: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sri: SriConfig::default(),
            edge_threshold: 0.5,
            surface_threshold: 0.5,
            edge_segments: 8,
            max_edges_per_segment: 4,
            min_valid_neighbors: 5,
            ramp_flatness: 0.02,
        }
    }
}

const EMPTY: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct SphericalRangeImage {
    pub rows: usize,
    pub cols: usize,
    /// Row-major ranges in meters, `0.0` for empty cells.
    range: Vec<f64>,
    /// Row-major source point index per cell.
    index: Vec<usize>,
}

impl SphericalRangeImage {
    pub fn range(&self, row: usize, col: usize) -> f64 {
        self.range[row * self.cols + col]
    }

    pub fn source_index(&self, row: usize, col: usize) -> Option<usize> {
        match self.index[row * self.cols + col] {
            EMPTY => None,
            i => Some(i),
        }
    }

    pub fn is_occupied(&self, row: usize, col: usize) -> bool {
        self.index[row * self.cols + col] != EMPTY
    }

    pub fn occupied_count(&self) -> usize {
        self.index.iter().filter(|&&i| i != EMPTY).count()
    }
}

/// Azimuth bin of a point: bin 0 starts at −π, bins increase counter-clockwise.
pub fn azimuth_bin(x: f64, y: f64, cols: usize) -> usize {
    let az = y.atan2(x);
    let c = ((az + PI) / (2.0 * PI) * cols as f64).floor() as isize;
    c.rem_euclid(cols as isize) as usize
}

pub fn project_to_sri(cloud: &PointCloud, cfg: &SriConfig) -> Result<SphericalRangeImage, FeatureError> {
    if cfg.rows < 8 || cfg.cols < 8 {
        return Err(FeatureError::ImageTooSmall {
            rows: cfg.rows,
            cols: cfg.cols,
        });
    }
    let up = cfg.fov_up_deg.to_radians();
    let down = cfg.fov_down_deg.to_radians();
    if !(up > down) {
        return Err(FeatureError::EmptyFieldOfView {
            up: cfg.fov_up_deg,
            down: cfg.fov_down_deg,
        });
    }
    let n = cfg.rows * cfg.cols;
    let mut sri = SphericalRangeImage {
        rows: cfg.rows,
        cols: cfg.cols,
        range: vec![0.0; n],
        index: vec![EMPTY; n],
    };
    for (i, p) in cloud.points.iter().enumerate() {
        let r = p.norm();
        if !(r > 0.0) {
            continue;
        }
        let row = match cloud.ring.as_ref().map(|ring| ring[i] as usize) {
            Some(ring) if ring < cfg.rows => ring,
            _ => {
                let elevation = p.z.atan2(p.x.hypot(p.y));
                let f = (up - elevation) / (up - down) * cfg.rows as f64;
                if !(0.0..cfg.rows as f64).contains(&f) {
                    continue;
                }
                f.floor() as usize
            }
        };
        let col = azimuth_bin(p.x, p.y, cfg.cols);
        let cell = row * cfg.cols + col;
        // nearest point wins, earlier index on equal range
        if sri.index[cell] == EMPTY || r < sri.range[cell] {
            sri.range[cell] = r;
            sri.index[cell] = i;
        }
    }
    Ok(sri)
}

/// Normalized 3×3 Sobel response (m/bin) at a cell together with its count
/// of occupied neighbours. Empty neighbours take the centre value so they
/// contribute no gradient. Columns wrap around; rows do not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradient {
    pub gx: f64,
    pub gy: f64,
    pub valid_neighbors: usize,
}

impl Gradient {
    pub fn magnitude(&self) -> f64 {
        (self.gx * self.gx + self.gy * self.gy).sqrt()
    }
}

pub fn sobel(sri: &SphericalRangeImage, row: usize, col: usize) -> Option<Gradient> {
    if !sri.is_occupied(row, col) {
        return None;
    }
    let center = sri.range(row, col);
    let mut v = [[center; 3]; 3];
    let mut valid = 0;
    for (di, vrow) in v.iter_mut().enumerate() {
        let r = row as isize + di as isize - 1;
        if r < 0 || r >= sri.rows as isize {
            continue;
        }
        for (dj, cell) in vrow.iter_mut().enumerate() {
            if di == 1 && dj == 1 {
                continue;
            }
            let c = (col as isize + dj as isize - 1).rem_euclid(sri.cols as isize) as usize;
            if sri.is_occupied(r as usize, c) {
                *cell = sri.range(r as usize, c);
                valid += 1;
            }
        }
    }
    let gx = ((v[0][2] + 2.0 * v[1][2] + v[2][2]) - (v[0][0] + 2.0 * v[1][0] + v[2][0])) / 8.0;
    let gy = ((v[2][0] + 2.0 * v[2][1] + v[2][2]) - (v[0][0] + 2.0 * v[0][1] + v[0][2])) / 8.0;
    Some(Gradient {
        gx,
        gy,
        valid_neighbors: valid,
    })
}

/// Source point indices of the classified cells, in cell order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureIndices {
    pub edges: Vec<usize>,
    pub surfaces: Vec<usize>,
}

pub fn classify(sri: &SphericalRangeImage, cloud: &PointCloud, cfg: &FeatureConfig) -> FeatureIndices {
    let segments = cfg.edge_segments.clamp(1, sri.cols);
    let rows = exec::map_range(sri.rows, |row| classify_row(sri, cloud, row, cfg, segments));
    let mut out = FeatureIndices::default();
    for (edges, surfaces) in rows {
        out.edges.extend(edges);
        out.surfaces.extend(surfaces);
    }
    out
}

fn classify_row(
    sri: &SphericalRangeImage,
    cloud: &PointCloud,
    row: usize,
    cfg: &FeatureConfig,
    segments: usize,
) -> (Vec<usize>, Vec<usize>) {
    let cols = sri.cols;
    let grads: Vec<Option<Gradient>> = (0..cols).map(|c| sobel(sri, row, c)).collect();
    let mut surfaces = Vec::new();
    let mut candidates = Vec::new();
    for (c, g) in grads.iter().enumerate() {
        let Some(g) = g else { continue };
        if g.valid_neighbors < cfg.min_valid_neighbors {
            continue;
        }
        let m = g.magnitude();
        if m > cfg.edge_threshold {
            if !is_occluded(sri, row, c, cfg.edge_threshold) && !is_ramp(sri, cloud, row, c, cfg.ramp_flatness) {
                candidates.push((c, m));
            }
        } else if m < cfg.surface_threshold {
            surfaces.push(c);
        }
    }

    // per-segment greedy non-maximum suppression with a cap
    let mut picked = vec![false; cols];
    let mut edges = Vec::new();
    for s in 0..segments {
        let lo = s * cols / segments;
        let hi = (s + 1) * cols / segments;
        let mut seg: Vec<(usize, f64)> = candidates
            .iter()
            .copied()
            .filter(|(c, _)| (lo..hi).contains(c))
            .collect();
        // magnitudes within 1e-9 count as tied so that round-off cannot
        // reorder them
        let key = |m: f64| (m * 1e9).round();
        seg.sort_by(|a, b| key(b.1).total_cmp(&key(a.1)).then(a.0.cmp(&b.0)));
        let mut taken = 0;
        for (c, _) in seg {
            if taken >= cfg.max_edges_per_segment {
                break;
            }
            let left = (c + cols - 1) % cols;
            let right = (c + 1) % cols;
            if (picked[left] && (lo..hi).contains(&left)) || (picked[right] && (lo..hi).contains(&right)) {
                continue;
            }
            picked[c] = true;
            edges.push(c);
            taken += 1;
        }
    }
    edges.sort_unstable();
    let to_source = |c: &usize| sri.source_index(row, *c).expect("classified cells are occupied");
    (
        edges.iter().map(to_source).collect(),
        surfaces.iter().map(to_source).collect(),
    )
}

/// A cell on the far side of a range jump: a horizontal neighbour is closer
/// by more than the jump that produces an edge-level gradient.
fn is_occluded(sri: &SphericalRangeImage, row: usize, col: usize, edge_threshold: f64) -> bool {
    let r = sri.range(row, col);
    let cols = sri.cols;
    [(col + cols - 1) % cols, (col + 1) % cols]
        .iter()
        .any(|&c| sri.is_occupied(row, c) && sri.range(row, c) < r - 2.0 * edge_threshold)
}

/// A cell whose occupied 3x3 neighbourhood lies on one plane: a steep but
/// smooth range slope rather than a crease or a jump.
fn is_ramp(sri: &SphericalRangeImage, cloud: &PointCloud, row: usize, col: usize, flatness: f64) -> bool {
    if !(flatness > 0.0) {
        return false;
    }
    let cols = sri.cols;
    let mut pts = Vec::with_capacity(9);
    for r in row.saturating_sub(1)..(row + 2).min(sri.rows) {
        for dc in [cols - 1, 0, 1] {
            if let Some(i) = sri.source_index(r, (col + dc) % cols) {
                pts.push(cloud.points[i]);
            }
        }
    }
    if pts.len() < 4 {
        return false;
    }
    let (_, cov) = mean_covariance(&pts);
    let (vals, _) = sorted_eigen(&cov);
    vals[0].max(0.0) <= flatness * flatness * vals[1]
}

pub fn extract_edges_surfaces(sri: &SphericalRangeImage, cloud: &PointCloud, cfg: &FeatureConfig) -> (PointCloud, PointCloud) {
    let idx = classify(sri, cloud, cfg);
    (cloud.select(&idx.edges), cloud.select(&idx.surfaces))
}

/// Per-scan features in the sensor frame.
#[derive(Debug, Clone, Default)]
pub struct FeatureCloud {
    pub edges: PointCloud,
    pub surfaces: PointCloud,
    pub descriptors: Vec<StdDescriptor>,
}
