use serde::{Deserialize, Serialize};

use crate::spatial::KdTree;
use crate::worldsim::GroundTruthWorld;

use super::{MapError, OccupancyMap};

/// Point-to-point error of the occupied map cells against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub per_point_errors: Vec<f64>,
}

impl AccuracyReport {
    pub fn from_errors(errors: Vec<f64>) -> Result<Self, MapError> {
        if errors.is_empty() {
            return Err(MapError::EmptyReport);
        }
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
        Ok(Self { mean, std: var.sqrt(), per_point_errors: errors })
    }

    pub fn max(&self) -> f64 {
        self.per_point_errors.iter().copied().fold(0.0, f64::max)
    }

    /// Counts per bin of width `bin` starting at zero; the last bin is open.
    pub fn histogram(&self, bin: f64, bins: usize) -> Vec<usize> {
        let mut h = vec![0usize; bins.max(1)];
        for e in &self.per_point_errors {
            let i = ((e / bin).floor() as usize).min(h.len() - 1);
            h[i] += 1;
        }
        h
    }
}

/// For every occupied map cell center, the distance to the nearest occupied
/// ground-truth voxel center. Map and world must share the voxel grid.
pub fn map_accuracy(map: &OccupancyMap, world: &GroundTruthWorld) -> Result<AccuracyReport, MapError> {
    if map.resolution().to_bits() != world.resolution().to_bits() {
        return Err(MapError::FrameMismatch(format!(
            "map resolution {} differs from world resolution {}",
            map.resolution(),
            world.resolution()
        )));
    }
    let occupied = map.occupied_keys();
    if occupied.is_empty() {
        return Err(MapError::EmptyReport);
    }
    // The nearest occupied voxel to a free cell is always a surface voxel.
    let surface = KdTree::build(world.surface_keys().into_iter().map(|k| world.center_of(k)).collect());
    let errors = occupied
        .into_iter()
        .map(|k| if world.is_occupied(k) { 0.0 } else { surface.nearest_distance(map.center_of(k)) })
        .collect();
    AccuracyReport::from_errors(errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::CellState;
    use crate::worldsim::WorldBuilder;
    use crate::{Vec3, VoxelKey};

    #[test]
    fn identical_voxelization_has_zero_error() {
        let w = WorldBuilder::box_room(0.2, Vec3::new(2.0, 2.0, 2.0), 1).unwrap();
        let mut m = OccupancyMap::with_resolution(0.2).unwrap();
        for k in w.surface_keys() {
            m.set_state(k, CellState::Occupied);
        }
        let r = map_accuracy(&m, &w).unwrap();
        assert_eq!(r.mean, 0.0);
        assert_eq!(r.std, 0.0);
    }

    #[test]
    fn empty_map_is_an_error() {
        let w = WorldBuilder::box_room(0.2, Vec3::new(2.0, 2.0, 2.0), 1).unwrap();
        let m = OccupancyMap::with_resolution(0.2).unwrap();
        assert!(matches!(map_accuracy(&m, &w), Err(MapError::EmptyReport)));
    }

    #[test]
    fn shifted_wall_is_one_voxel_off() {
        let w = WorldBuilder::box_room(0.2, Vec3::new(3.0, 3.0, 3.0), 1).unwrap();
        let mut m = OccupancyMap::with_resolution(0.2).unwrap();
        // wall voxels at x = -1 moved one voxel into the room
        for z in 2..13 {
            for y in 2..13 {
                m.set_state(VoxelKey::new(0, y, z), CellState::Occupied);
            }
        }
        let r = map_accuracy(&m, &w).unwrap();
        assert!((r.mean - 0.2).abs() < 1e-9);
    }

    #[test]
    fn stats_recompute_from_errors() {
        let r = AccuracyReport::from_errors(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.mean, 1.5);
        assert!((r.std - 1.25f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.histogram(1.0, 3), vec![1, 1, 2]);
    }
}
