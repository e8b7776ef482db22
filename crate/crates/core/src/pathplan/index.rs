use crate::mapping::OccupancyMap;
use crate::spatial::{Aabb, KdTree};
use crate::Vec3;

/// Exact nearest-obstacle queries over a fixed set of occupied centers.
#[derive(Debug, Clone, Default)]
pub struct ObstacleIndex {
    tree: KdTree,
}

impl ObstacleIndex {
    pub fn from_points(points: Vec<Vec3>) -> Self {
        Self { tree: KdTree::build(points) }
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    /// Distance to the nearest obstacle, `+∞` when there is none.
    pub fn distance(&self, p: Vec3) -> f64 {
        self.tree.nearest_distance(p)
    }

    pub fn nearest(&self, p: Vec3) -> Option<(Vec3, f64)> {
        self.tree.nearest(p)
    }
}

/// Index over the occupied cells of `map` whose centers lie in `region`.
pub fn build_obstacle_index(map: &OccupancyMap, region: &Aabb) -> ObstacleIndex {
    let pts = map
        .occupied_keys()
        .into_iter()
        .map(|k| map.center_of(k))
        .filter(|c| region.contains(*c))
        .collect();
    ObstacleIndex::from_points(pts)
}
