use crate::Vec3;

use super::{FreeSpace, ObstacleIndex, Path};

/// Minimum obstacle distance over samples of `ab` at half-voxel spacing
/// (endpoints included).
pub fn segment_clearance(index: &ObstacleIndex, a: Vec3, b: Vec3, res: f64) -> f64 {
    let n = (a.distance(b) / (0.5 * res)).ceil().max(1.0) as usize;
    (0..=n)
        .map(|i| index.distance(a.lerp(b, i as f64 / n as f64)))
        .fold(f64::INFINITY, f64::min)
}

/// Pushes interior waypoints that are closer than `d_min` to an obstacle
/// away from it, half a voxel per iteration.
///
/// A displacement is kept only if the waypoint's own clearance grows, the
/// clearance of neither adjacent segment drops, and both adjacent segments
/// stay inside free space. Endpoints never move.
pub fn postprocess_path(
    path: &Path,
    index: &ObstacleIndex,
    d_min: f64,
    max_iters: usize,
    res: f64,
    free: &impl FreeSpace,
) -> Path {
    let mut w = path.waypoints.clone();
    let step = 0.5 * res;
    for _ in 0..max_iters {
        let mut moved = false;
        for i in 1..w.len().saturating_sub(1) {
            let Some((o, c)) = index.nearest(w[i]) else { continue };
            if c >= d_min || c == 0.0 {
                continue;
            }
            let cand = w[i] + (w[i] - o) / c * step;
            if index.distance(cand) <= c {
                continue;
            }
            let before = segment_clearance(index, w[i - 1], w[i], res).min(segment_clearance(index, w[i], w[i + 1], res));
            let s1 = segment_clearance(index, w[i - 1], cand, res);
            let s2 = segment_clearance(index, cand, w[i + 1], res);
            if s1.min(s2) < before {
                continue;
            }
            if !free.segment_free(w[i - 1], cand) || !free.segment_free(cand, w[i + 1]) {
                continue;
            }
            w[i] = cand;
            moved = true;
        }
        if !moved {
            break;
        }
    }
    Path::new(w).measure(index, res)
}

/// Greedy farthest-visible shortcutting: from each kept waypoint jump to the
/// farthest later waypoint whose connecting segment has clearance ≥ `d_min`
/// and lies in free space. Consecutive waypoints are always connectable, so
/// original segments below `d_min` survive as they are.
pub fn shortcut_path(path: &Path, index: &ObstacleIndex, d_min: f64, res: f64, free: &impl FreeSpace) -> Path {
    let w = &path.waypoints;
    if w.len() <= 2 {
        return path.clone().measure(index, res);
    }
    let mut out = vec![w[0]];
    let mut i = 0;
    while i < w.len() - 1 {
        let mut j = w.len() - 1;
        while j > i + 1 {
            if segment_clearance(index, w[i], w[j], res) >= d_min && free.segment_free(w[i], w[j]) {
                break;
            }
            j -= 1;
        }
        out.push(w[j]);
        i = j;
    }
    Path::new(out).measure(index, res)
}
