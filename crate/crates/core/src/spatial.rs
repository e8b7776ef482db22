//! Geometry shared by the world, the map and the planner: voxel indexing on a
//! global grid anchored at the origin, axis-aligned boxes, grid ray traversal
//! and a static KD-tree for exact nearest-neighbour queries.

use crate::{Vec3, VoxelKey};
use serde::{Deserialize, Serialize};

/// Voxel containing `p` on a grid of edge `res` anchored at the origin.
#[inline]
pub fn voxel_key(p: Vec3, res: f64) -> VoxelKey {
    VoxelKey::new(
        (p.x / res).floor() as i32,
        (p.y / res).floor() as i32,
        (p.z / res).floor() as i32,
    )
}

#[inline]
pub fn voxel_center(key: VoxelKey, res: f64) -> Vec3 {
    Vec3::new(
        (key.x as f64 + 0.5) * res,
        (key.y as f64 + 0.5) * res,
        (key.z as f64 + 0.5) * res,
    )
}

/// The six face neighbours.
pub const FACE_NEIGHBORS: [VoxelKey; 6] = [
    VoxelKey::new(1, 0, 0),
    VoxelKey::new(-1, 0, 0),
    VoxelKey::new(0, 1, 0),
    VoxelKey::new(0, -1, 0),
    VoxelKey::new(0, 0, 1),
    VoxelKey::new(0, 0, -1),
];

/// All 26 neighbours in lexicographic offset order.
pub fn neighbors26() -> impl Iterator<Item = VoxelKey> {
    (-1..=1).flat_map(|dx| {
        (-1..=1).flat_map(move |dy| {
            (-1..=1)
                .map(move |dz| VoxelKey::new(dx, dy, dz))
                .filter(|o| *o != VoxelKey::ZERO)
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self {
            min: min.min(max),
            max: min.max(max),
        }
    }

    pub fn around(center: Vec3, half_size: f64) -> Self {
        let h = Vec3::splat(half_size);
        Self::new(center - h, center + h)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.cmpge(self.min).all() && p.cmple(self.max).all()
    }

    pub fn expanded(&self, margin: f64) -> Self {
        let m = Vec3::splat(margin);
        Self::new(self.min - m, self.max + m)
    }

    pub fn union(&self, other: &Aabb) -> Self {
        Self::new(self.min.min(other.min), self.max.max(other.max))
    }

    pub fn intersection(&self, other: &Aabb) -> Option<Self> {
        let min = self.min.max(other.min);
        let max = self.max.min(other.max);
        min.cmple(max).all().then_some(Self { min, max })
    }

    pub fn is_empty(&self) -> bool {
        (self.max - self.min).cmple(Vec3::ZERO).any()
    }

    /// Inclusive range of voxel keys whose centers lie inside the box.
    pub fn key_range(&self, res: f64) -> (VoxelKey, VoxelKey) {
        let lo = VoxelKey::new(
            (self.min.x / res - 0.5).ceil() as i32,
            (self.min.y / res - 0.5).ceil() as i32,
            (self.min.z / res - 0.5).ceil() as i32,
        );
        let hi = VoxelKey::new(
            (self.max.x / res - 0.5).floor() as i32,
            (self.max.y / res - 0.5).floor() as i32,
            (self.max.z / res - 0.5).floor() as i32,
        );
        (lo, hi)
    }
}

/// Walks the voxels pierced by the ray `origin + t * dir`, `t ∈ [0, max_t]`,
/// in order. `visit` receives the voxel and the parameter at which the ray
/// enters it; returning `false` stops the walk. `dir` must be unit length.
pub fn traverse_voxels(
    origin: Vec3,
    dir: Vec3,
    max_t: f64,
    res: f64,
    mut visit: impl FnMut(VoxelKey, f64) -> bool,
) {
    let mut key = voxel_key(origin, res);
    let o = origin.to_array();
    let d = dir.to_array();
    let mut step = [0i32; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    let k = key.to_array();
    for axis in 0..3 {
        if d[axis] > 0.0 {
            step[axis] = 1;
            let boundary = (k[axis] as f64 + 1.0) * res;
            t_max[axis] = (boundary - o[axis]) / d[axis];
            t_delta[axis] = res / d[axis];
        } else if d[axis] < 0.0 {
            step[axis] = -1;
            let boundary = k[axis] as f64 * res;
            t_max[axis] = (boundary - o[axis]) / d[axis];
            t_delta[axis] = -res / d[axis];
        }
    }
    let mut t_enter = 0.0;
    loop {
        if !visit(key, t_enter) {
            return;
        }
        let mut axis = 0;
        if t_max[1] < t_max[axis] {
            axis = 1;
        }
        if t_max[2] < t_max[axis] {
            axis = 2;
        }
        t_enter = t_max[axis];
        if t_enter > max_t || !t_enter.is_finite() {
            return;
        }
        match axis {
            0 => key.x += step[0],
            1 => key.y += step[1],
            _ => key.z += step[2],
        }
        t_max[axis] += t_delta[axis];
    }
}

/// Static 3D KD-tree over a point set, stored implicitly as a median-split
/// permutation of the input.
#[derive(Debug, Clone, Default)]
pub struct KdTree {
    points: Vec<Vec3>,
}

impl KdTree {
    pub fn build(mut points: Vec<Vec3>) -> Self {
        build_rec(&mut points, 0);
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Exact nearest point and its distance, `None` on an empty tree.
    pub fn nearest(&self, q: Vec3) -> Option<(Vec3, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, 0usize);
        nearest_rec(&self.points, 0, 0, q, &mut best);
        Some((self.points[best.1], best.0.sqrt()))
    }

    /// Distance to the nearest point, `+∞` on an empty tree.
    pub fn nearest_distance(&self, q: Vec3) -> f64 {
        self.nearest(q).map_or(f64::INFINITY, |(_, d)| d)
    }
}

fn axis_of(p: Vec3, axis: usize) -> f64 {
    match axis {
        0 => p.x,
        1 => p.y,
        _ => p.z,
    }
}

fn build_rec(pts: &mut [Vec3], depth: usize) {
    if pts.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = pts.len() / 2;
    pts.select_nth_unstable_by(mid, |a, b| axis_of(*a, axis).total_cmp(&axis_of(*b, axis)));
    let (left, right) = pts.split_at_mut(mid);
    build_rec(left, depth + 1);
    build_rec(&mut right[1..], depth + 1);
}

fn nearest_rec(pts: &[Vec3], offset: usize, depth: usize, q: Vec3, best: &mut (f64, usize)) {
    if pts.is_empty() {
        return;
    }
    let mid = pts.len() / 2;
    let p = pts[mid];
    let d2 = p.distance_squared(q);
    if d2 < best.0 || (d2 == best.0 && offset + mid < best.1) {
        *best = (d2, offset + mid);
    }
    let axis = depth % 3;
    let diff = axis_of(q, axis) - axis_of(p, axis);
    let (near, near_off, far, far_off) = if diff < 0.0 {
        (&pts[..mid], offset, &pts[mid + 1..], offset + mid + 1)
    } else {
        (&pts[mid + 1..], offset + mid + 1, &pts[..mid], offset)
    };
    nearest_rec(near, near_off, depth + 1, q, best);
    if diff * diff <= best.0 {
        nearest_rec(far, far_off, depth + 1, q, best);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kdtree_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Vec3> = (0..1000)
            .map(|_| Vec3::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-3.0..3.0)))
            .collect();
        let tree = KdTree::build(pts.clone());
        for _ in 0..100 {
            let q = Vec3::new(rng.gen_range(-12.0..12.0), rng.gen_range(-12.0..12.0), rng.gen_range(-4.0..4.0));
            let brute = pts.iter().map(|p| p.distance(q)).fold(f64::INFINITY, f64::min);
            assert_eq!(tree.nearest_distance(q), brute);
        }
    }

    #[test]
    fn empty_tree_is_infinitely_far() {
        assert_eq!(KdTree::build(vec![]).nearest_distance(Vec3::ONE), f64::INFINITY);
    }

    #[test]
    fn traversal_visits_contiguous_voxels() {
        let mut keys = Vec::new();
        let dir = Vec3::new(1.0, 0.7, -0.2).normalize();
        traverse_voxels(Vec3::new(0.05, 0.05, 0.05), dir, 3.0, 0.2, |k, _| {
            keys.push(k);
            true
        });
        for w in keys.windows(2) {
            let d = (w[1] - w[0]).abs();
            assert_eq!(d.x + d.y + d.z, 1);
        }
        assert_eq!(*keys.last().unwrap(), voxel_key(Vec3::new(0.05, 0.05, 0.05) + dir * 3.0, 0.2));
    }

    #[test]
    fn key_range_selects_centers_inside_box() {
        let b = Aabb::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.45, 0.2));
        let (lo, hi) = b.key_range(0.2);
        assert_eq!(lo, VoxelKey::new(0, 0, 0));
        assert_eq!(hi, VoxelKey::new(4, 1, 0));
    }
}
