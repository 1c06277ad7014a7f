//! Exact k-nearest-neighbour index over fixed-dimension points.
//!
//! Results are ordered by `(squared distance, insertion index)`, so they are
//! identical to a brute-force scan including tie order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance_squared: f64,
}

impl Neighbor {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.distance_squared
            .total_cmp(&other.distance_squared)
            .then(self.index.cmp(&other.index))
    }
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

#[inline]
pub fn squared_distance<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut s = 0.0;
    for i in 0..D {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

/// Reference k-NN by exhaustive scan.
pub fn brute_force_knn<const D: usize>(points: &[[f64; D]], query: &[f64; D], k: usize) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = points
        .iter()
        .enumerate()
        .map(|(index, p)| Neighbor {
            index,
            distance_squared: squared_distance(p, query),
        })
        .collect();
    all.sort();
    all.truncate(k);
    all
}

#[derive(Debug, Clone)]
pub struct KdTree<const D: usize> {
    points: Vec<[f64; D]>,
    /// Permutation of point indices; every subrange `[lo, hi)` of a node is
    /// split at `(lo + hi) / 2`.
    order: Vec<usize>,
    /// Split dimension, indexed by the split position.
    split_dim: Vec<u8>,
}

impl<const D: usize> Default for KdTree<D> {
    fn default() -> Self {
        Self::build(Vec::new())
    }
}

impl<const D: usize> KdTree<D> {
    pub fn build(points: Vec<[f64; D]>) -> Self {
        let n = points.len();
        let mut tree = Self {
            order: (0..n).collect(),
            split_dim: vec![0; n],
            points,
        };
        tree.build_range(0, n);
        tree
    }

    fn build_range(&mut self, lo: usize, hi: usize) {
        if hi - lo <= LEAF_SIZE {
            return;
        }
        let dim = self.widest_dimension(lo, hi);
        let mid = (lo + hi) / 2;
        let points = &self.points;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            points[a][dim]
                .total_cmp(&points[b][dim])
                .then(a.cmp(&b))
        });
        self.split_dim[mid] = dim as u8;
        self.build_range(lo, mid);
        self.build_range(mid + 1, hi);
    }

    fn widest_dimension(&self, lo: usize, hi: usize) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for d in 0..D {
            let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[lo..hi] {
                let v = self.points[i][d];
                min = min.min(v);
                max = max.max(v);
            }
            if max - min > best.1 {
                best = (d, max - min);
            }
        }
        best.0
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; D]] {
        &self.points
    }

    pub fn knn(&self, query: &[f64; D], k: usize) -> Vec<Neighbor> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(query, k, 0, self.points.len(), &mut heap);
        let mut out = heap.into_vec();
        out.sort();
        out
    }

    pub fn nearest(&self, query: &[f64; D]) -> Option<Neighbor> {
        self.knn(query, 1).into_iter().next()
    }

    fn offer(&self, query: &[f64; D], index: usize, k: usize, heap: &mut BinaryHeap<Neighbor>) {
        let cand = Neighbor {
            index,
            distance_squared: squared_distance(&self.points[index], query),
        };
        if heap.len() < k {
            heap.push(cand);
        } else if let Some(worst) = heap.peek() {
            if cand < *worst {
                heap.pop();
                heap.push(cand);
            }
        }
    }

    fn search(&self, query: &[f64; D], k: usize, lo: usize, hi: usize, heap: &mut BinaryHeap<Neighbor>) {
        if hi - lo <= LEAF_SIZE {
            for &i in &self.order[lo..hi] {
                self.offer(query, i, k, heap);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let pivot = self.order[mid];
        let dim = self.split_dim[mid] as usize;
        let diff = query[dim] - self.points[pivot][dim];
        let (near, far) = if diff <= 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(query, k, near.0, near.1, heap);
        self.offer(query, pivot, k, heap);
        // `<=` keeps equal-distance candidates reachable for the index tie-break
        let must_visit = heap.len() < k || diff * diff <= heap.peek().map_or(f64::INFINITY, |w| w.distance_squared);
        if must_visit {
            self.search(query, k, far.0, far.1, heap);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force_3d() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<[f64; 3]> = (0..1000)
            .map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-1.0..1.0)])
            .collect();
        let tree = KdTree::build(pts.clone());
        for _ in 0..200 {
            let q = [rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0), rng.random_range(-2.0..2.0)];
            assert_eq!(tree.knn(&q, 5), brute_force_knn(&pts, &q, 5));
        }
    }

    #[test]
    fn ties_follow_index_order() {
        // lattice with many equal distances
        let pts: Vec<[f64; 2]> = (0..20)
            .flat_map(|i| (0..20).map(move |j| [i as f64, j as f64]))
            .collect();
        let tree = KdTree::build(pts.clone());
        for q in [[5.0, 5.0], [5.5, 5.5], [0.0, 0.0], [19.5, 3.0]] {
            assert_eq!(tree.knn(&q, 9), brute_force_knn(&pts, &q, 9));
        }
    }

    #[test]
    fn duplicates_and_small_sets() {
        let pts = vec![[1.0, 1.0, 1.0]; 30];
        let tree = KdTree::build(pts.clone());
        let q = [0.0, 0.0, 0.0];
        assert_eq!(tree.knn(&q, 5), brute_force_knn(&pts, &q, 5));
        assert_eq!(tree.knn(&q, 50).len(), 30);
        let empty: KdTree<3> = KdTree::build(vec![]);
        assert!(empty.knn(&q, 3).is_empty());
        assert!(empty.nearest(&q).is_none());
    }
}
