use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::mapping::OccupancyMap;
use crate::spatial::{self, Aabb};
use crate::{Vec3, VoxelKey};

use super::{build_obstacle_index, ObstacleIndex, Path, PlanError};

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOptions {
    /// When the goal cell itself is not traversable, any traversable cell
    /// within this distance of the goal is accepted. Defaults to
    /// `d_min + resolution`.
    pub goal_radius: Option<f64>,
    /// Cells centered outside the region are untraversable.
    pub region: Option<Aabb>,
    pub max_expansions: usize,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self { goal_radius: None, region: None, max_expansions: 4_000_000 }
    }
}

#[derive(Clone, Copy)]
struct Entry {
    f: f64,
    h: f64,
    g: f64,
    key: VoxelKey,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    // reversed: BinaryHeap pops the smallest (f, h, key)
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then(o.h.total_cmp(&self.h))
            .then_with(|| o.key.to_array().cmp(&self.key.to_array()))
    }
}

/// Traversability test shared by the search and its callers.
pub(crate) struct Feasibility<'a> {
    pub map: &'a OccupancyMap,
    pub index: &'a ObstacleIndex,
    pub d_min: f64,
    pub region: Option<Aabb>,
    cache: FxHashMap<VoxelKey, bool>,
}

impl<'a> Feasibility<'a> {
    pub fn new(map: &'a OccupancyMap, index: &'a ObstacleIndex, d_min: f64, region: Option<Aabb>) -> Self {
        Self { map, index, d_min, region, cache: FxHashMap::default() }
    }

    pub fn traversable(&mut self, k: VoxelKey) -> bool {
        if let Some(v) = self.cache.get(&k) {
            return *v;
        }
        let c = self.map.center_of(k);
        let v = self.map.is_free(k)
            && self.region.is_none_or(|r| r.contains(c))
            && self.index.distance(c) >= self.d_min;
        self.cache.insert(k, v);
        v
    }

    /// Diagonal moves additionally need every cell of the spanned box free,
    /// so the straight segment between centers never clips a corner of an
    /// unknown or occupied cell.
    pub fn corner_free(&self, a: VoxelKey, off: VoxelKey) -> bool {
        let n = off.abs();
        if n.x + n.y + n.z <= 1 {
            return true;
        }
        for dz in 0..=n.z {
            for dy in 0..=n.y {
                for dx in 0..=n.x {
                    let k = a + VoxelKey::new(dx * off.x.signum(), dy * off.y.signum(), dz * off.z.signum());
                    if !self.map.is_free(k) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Plans with a KD-tree over every occupied cell of the map (restricted to
/// `options.region`, padded by the clearance, when a region is given).
pub fn plan_path(map: &OccupancyMap, start: Vec3, goal: Vec3, d_min: f64) -> Result<Path, PlanError> {
    plan_path_local(map, start, goal, d_min, &PlanOptions::default())
}

pub fn plan_path_local(
    map: &OccupancyMap,
    start: Vec3,
    goal: Vec3,
    d_min: f64,
    options: &PlanOptions,
) -> Result<Path, PlanError> {
    let region = options.region.map_or_else(
        || Aabb::new(Vec3::splat(-f64::MAX), Vec3::splat(f64::MAX)),
        |r| r.expanded(d_min + map.resolution()),
    );
    let index = build_obstacle_index(map, &region);
    plan_path_with(map, &index, start, goal, d_min, options)
}

/// Cell sequence found by the grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPlan {
    pub cells: Vec<VoxelKey>,
    /// Sum of Euclidean edge lengths between consecutive cell centers.
    pub cost: f64,
    /// True when the goal cell itself was the target.
    pub reached_goal_cell: bool,
}

/// A* over the 26-connected grid with Euclidean edge costs. Ties on `f`
/// prefer the smaller heuristic, then the lexicographically smaller cell.
///
/// Traversable cells are free, inside the region and at least `d_min` from
/// every indexed obstacle; the start cell only needs to be free. If the goal
/// cell is not traversable, the search ends at the first traversable cell
/// within the goal radius.
pub fn plan_grid(
    map: &OccupancyMap,
    index: &ObstacleIndex,
    start: Vec3,
    goal: Vec3,
    d_min: f64,
    options: &PlanOptions,
) -> Result<GridPlan, PlanError> {
    if !start.is_finite() || !goal.is_finite() || !(d_min >= 0.0) {
        return Err(PlanError::Invalid("non-finite position or negative clearance".into()));
    }
    let res = map.resolution();
    let s = map.key_of(start);
    if !map.is_free(s) {
        return Err(PlanError::StartNotFree(start));
    }
    let mut feas = Feasibility::new(map, index, d_min, options.region);
    let gk = map.key_of(goal);
    let goal_cell_target = gk == s || feas.traversable(gk);
    let radius = options.goal_radius.unwrap_or(d_min + res);
    let gc = map.center_of(gk);
    let h_of = |k: VoxelKey| {
        let c = spatial::voxel_center(k, res);
        if goal_cell_target {
            c.distance(gc)
        } else {
            (c.distance(goal) - radius).max(0.0)
        }
    };
    let offsets: Vec<(VoxelKey, f64)> = spatial::neighbors26()
        .map(|o| (o, o.as_dvec3().length() * res))
        .collect();

    let mut g: FxHashMap<VoxelKey, f64> = FxHashMap::default();
    let mut parent: FxHashMap<VoxelKey, VoxelKey> = FxHashMap::default();
    let mut closed: FxHashSet<VoxelKey> = FxHashSet::default();
    let mut open = BinaryHeap::new();
    let h0 = h_of(s);
    g.insert(s, 0.0);
    open.push(Entry { f: h0, h: h0, g: 0.0, key: s });
    let mut expansions = 0usize;
    let mut reached = None;
    while let Some(e) = open.pop() {
        if !closed.insert(e.key) {
            continue;
        }
        let is_target = if goal_cell_target {
            e.key == gk
        } else {
            map.center_of(e.key).distance(goal) <= radius && (e.key != s || feas.traversable(s))
        };
        if is_target {
            reached = Some(e);
            break;
        }
        expansions += 1;
        if expansions > options.max_expansions {
            break;
        }
        for (o, w) in &offsets {
            let n = e.key + *o;
            if closed.contains(&n) || !feas.traversable(n) || !feas.corner_free(e.key, *o) {
                continue;
            }
            let ng = e.g + w;
            if g.get(&n).is_none_or(|old| ng < *old) {
                g.insert(n, ng);
                parent.insert(n, e.key);
                let h = h_of(n);
                open.push(Entry { f: ng + h, h, g: ng, key: n });
            }
        }
    }
    let Some(end) = reached else { return Err(PlanError::NoPath) };
    let mut cells = vec![end.key];
    while let Some(p) = parent.get(cells.last().unwrap()) {
        cells.push(*p);
    }
    cells.reverse();
    Ok(GridPlan { cells, cost: end.g, reached_goal_cell: goal_cell_target })
}

/// [`plan_grid`] turned into a waypoint path: the start position replaces
/// the first cell center, and the goal position the last one when the goal
/// cell was reached.
pub fn plan_path_with(
    map: &OccupancyMap,
    index: &ObstacleIndex,
    start: Vec3,
    goal: Vec3,
    d_min: f64,
    options: &PlanOptions,
) -> Result<Path, PlanError> {
    let plan = plan_grid(map, index, start, goal, d_min, options)?;
    let mut pts: Vec<Vec3> = plan.cells.iter().map(|k| map.center_of(*k)).collect();
    pts[0] = start;
    if plan.reached_goal_cell {
        if plan.cells.len() == 1 {
            pts.push(goal);
        } else {
            *pts.last_mut().unwrap() = goal;
        }
    }
    Ok(Path::new(pts).measure(index, map.resolution()))
}
