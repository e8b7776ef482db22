use std::cmp::Ordering;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::mapping::OccupancyMap;
use crate::spatial::Aabb;
use crate::{Vec3, VoxelKey};

use super::Policy;

/// What the goal selector sees of the robot and the mission.
#[derive(Debug, Clone)]
pub struct GoalContext<'a> {
    pub position: Vec3,
    /// Current flight direction; zero makes every frontier equally aligned.
    pub direction: Vec3,
    /// Frontiers outside are ignored by `full_coverage_bounded`.
    pub bounds: Option<Aabb>,
    pub ratio_half_size: f64,
    pub min_distance: f64,
    /// Frontier cells are grouped into cubes of this edge and each cube is
    /// represented by the member closest to the cube's mean.
    pub cluster_size: f64,
    /// Visited or unreachable frontier cells.
    pub excluded: &'a FxHashSet<VoxelKey>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GoalChoice {
    Goal(Vec3),
    Exhausted,
}

/// Frontier representatives in decreasing preference under `policy`.
///
/// Scores compare exactly; ties go to the nearer frontier, then to the
/// smaller cell key.
pub fn rank_goals(policy: Policy, map: &OccupancyMap, ctx: &GoalContext) -> Vec<VoxelKey> {
    let bounds = match policy {
        Policy::FullCoverageBounded => ctx.bounds,
        _ => None,
    };
    let cells: Vec<VoxelKey> = map
        .extract_frontiers(bounds.as_ref())
        .into_iter()
        .filter(|k| !ctx.excluded.contains(k) && map.center_of(*k).distance(ctx.position) >= ctx.min_distance)
        .collect();
    let reps = cluster(map, &cells, ctx.cluster_size);
    let dir = ctx.direction.normalize_or_zero();
    let mut scored: Vec<(f64, f64, VoxelKey)> = reps
        .into_iter()
        .map(|k| {
            let c = map.center_of(k);
            let d = c.distance(ctx.position);
            let score = match policy {
                Policy::DeepLateral => {
                    if dir == Vec3::ZERO || d == 0.0 {
                        0.0
                    } else {
                        (dir.dot((c - ctx.position) / d)).clamp(-1.0, 1.0).acos()
                    }
                }
                Policy::HighestFrontier => -c.z,
                Policy::UnknownRatio => -map.unknown_free_ratio(c, ctx.ratio_half_size),
                Policy::FullCoverageBounded => 0.0,
            };
            (score, d, k)
        })
        .collect();
    scored.sort_by(|a, b| {
        a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then_with(|| a.2.to_array().cmp(&b.2.to_array()))
    });
    scored.into_iter().map(|s| s.2).collect()
}

/// Best frontier under `policy`, or `Exhausted` when none is left.
pub fn select_goal(policy: Policy, map: &OccupancyMap, ctx: &GoalContext) -> GoalChoice {
    match rank_goals(policy, map, ctx).first() {
        Some(k) => GoalChoice::Goal(map.center_of(*k)),
        None => GoalChoice::Exhausted,
    }
}

fn cluster(map: &OccupancyMap, cells: &[VoxelKey], size: f64) -> Vec<VoxelKey> {
    let mut groups: FxHashMap<VoxelKey, Vec<VoxelKey>> = FxHashMap::default();
    for &k in cells {
        let c = map.center_of(k);
        let g = (c / size).floor().as_ivec3();
        groups.entry(g).or_default().push(k);
    }
    let mut keys: Vec<VoxelKey> = groups.keys().copied().collect();
    keys.sort_unstable_by_key(|k| k.to_array());
    keys.into_iter()
        .map(|g| {
            let members = &groups[&g];
            let mean = members.iter().map(|k| map.center_of(*k)).sum::<Vec3>() / members.len() as f64;
            *members
                .iter()
                .min_by(|a, b| {
                    map.center_of(**a)
                        .distance_squared(mean)
                        .partial_cmp(&map.center_of(**b).distance_squared(mean))
                        .unwrap_or(Ordering::Equal)
                        .then_with(|| a.to_array().cmp(&b.to_array()))
                })
                .unwrap()
        })
        .collect()
}
