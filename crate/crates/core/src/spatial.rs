//! Per-class nearest-neighbour lookup over reference centroids.

use std::collections::BTreeMap;

use crate::geometry::Point3;
use crate::map::{ClassId, ObjectMap};

/// Below this many points a linear scan is used instead of a tree.
const BRUTE_FORCE_BELOW: usize = 64;

/// Static 3-d tree, stored as an implicit balanced tree over a permuted
/// point array (median at the middle of every slice).
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
}

impl KdTree {
    pub fn new(mut points: Vec<Point3>) -> Self {
        if points.len() >= BRUTE_FORCE_BELOW {
            build(&mut points, 0);
        }
        Self { points }
    }

    /// Squared distance to the nearest stored point.
    pub fn nearest_sq(&self, q: &Point3) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        if self.points.len() < BRUTE_FORCE_BELOW {
            return self
                .points
                .iter()
                .map(|p| (p - q).norm_squared())
                .min_by(f64::total_cmp);
        }
        let mut best = f64::INFINITY;
        search(&self.points, 0, q, &mut best);
        Some(best)
    }
}

fn build(points: &mut [Point3], depth: usize) {
    if points.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = points.len() / 2;
    points.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    let (left, right) = points.split_at_mut(mid);
    build(left, depth + 1);
    build(&mut right[1..], depth + 1);
}

fn search(points: &[Point3], depth: usize, q: &Point3, best: &mut f64) {
    if points.is_empty() {
        return;
    }
    let axis = depth % 3;
    let mid = points.len() / 2;
    let pivot = &points[mid];
    let d = (pivot - q).norm_squared();
    if d < *best {
        *best = d;
    }
    let diff = q[axis] - pivot[axis];
    let (near, far) = if diff < 0.0 {
        (&points[..mid], &points[mid + 1..])
    } else {
        (&points[mid + 1..], &points[..mid])
    };
    search(near, depth + 1, q, best);
    if diff * diff < *best {
        search(far, depth + 1, q, best);
    }
}

/// One tree per class over a reference map.
#[derive(Debug, Clone, Default)]
pub struct ClassIndex {
    trees: BTreeMap<ClassId, KdTree>,
}

impl ClassIndex {
    pub fn new(map: &ObjectMap) -> Self {
        let mut grouped: BTreeMap<ClassId, Vec<Point3>> = BTreeMap::new();
        for o in map {
            grouped.entry(o.class).or_default().push(o.centroid);
        }
        Self {
            trees: grouped
                .into_iter()
                .map(|(c, pts)| (c, KdTree::new(pts)))
                .collect(),
        }
    }

    pub fn nearest_sq(&self, class: ClassId, q: &Point3) -> Option<f64> {
        self.trees.get(&class)?.nearest_sq(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tree_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pt = || Point3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(0.0..3.0));
        for n in [1, 10, 63, 64, 65, 500] {
            let pts: Vec<Point3> = (0..n).map(|_| pt()).collect();
            let tree = KdTree::new(pts.clone());
            for _ in 0..200 {
                let q = pt();
                let expect = pts.iter().map(|p| (p - q).norm_squared()).fold(f64::INFINITY, f64::min);
                assert_eq!(tree.nearest_sq(&q), Some(expect));
            }
        }
        assert_eq!(KdTree::new(Vec::new()).nearest_sq(&Point3::zeros()), None);
    }
}
