//! Pessimistic grid planning on the belief map: unknown and occupied cells
//! are never traversed, clearance comes from a KD-tree over occupied cells.

mod astar;
mod index;
mod smooth;

pub use astar::{plan_grid, plan_path, plan_path_local, plan_path_with, GridPlan, PlanOptions};
pub use index::{build_obstacle_index, ObstacleIndex};
pub use smooth::{postprocess_path, segment_clearance, shortcut_path};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::OccupancyMap;
use crate::spatial;
use crate::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("start {0:?} is not in a free cell")]
    StartNotFree(Vec3),
    #[error("no traversable cell near the goal is reachable")]
    NoPath,
    #[error("invalid planning input: {0}")]
    Invalid(String),
}

/// Waypoint polyline with the minimum obstacle distance along it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Vec3>,
    pub clearance: f64,
}

impl Path {
    /// Drops consecutive duplicates. Clearance is left at `+∞` until measured.
    pub fn new(waypoints: Vec<Vec3>) -> Self {
        let mut w: Vec<Vec3> = Vec::with_capacity(waypoints.len());
        for p in waypoints {
            if w.last() != Some(&p) {
                w.push(p);
            }
        }
        Self { waypoints: w, clearance: f64::INFINITY }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        self.waypoints.windows(2).map(|w| w[0].distance(w[1])).collect()
    }

    pub fn length(&self) -> f64 {
        self.segment_lengths().iter().sum()
    }

    pub fn start(&self) -> Option<Vec3> {
        self.waypoints.first().copied()
    }

    pub fn end(&self) -> Option<Vec3> {
        self.waypoints.last().copied()
    }

    /// Recomputes `clearance` against `index` at half-voxel sampling.
    pub fn measure(mut self, index: &ObstacleIndex, res: f64) -> Self {
        self.clearance = match self.waypoints.len() {
            0 => f64::INFINITY,
            1 => index.distance(self.waypoints[0]),
            _ => self
                .waypoints
                .windows(2)
                .map(|w| segment_clearance(index, w[0], w[1], res))
                .fold(f64::INFINITY, f64::min),
        };
        self
    }
}

/// Free-space oracle for the smoothing passes.
pub trait FreeSpace {
    fn segment_free(&self, a: Vec3, b: Vec3) -> bool;
}

/// Every voxel pierced by the segment must be free in the map.
impl FreeSpace for OccupancyMap {
    fn segment_free(&self, a: Vec3, b: Vec3) -> bool {
        let res = self.resolution();
        if !self.is_free(self.key_of(a)) {
            return false;
        }
        let len = a.distance(b);
        if len == 0.0 {
            return true;
        }
        let dir = (b - a) / len;
        let mut ok = true;
        spatial::traverse_voxels(a, dir, len, res, |k, _| {
            ok = self.is_free(k);
            ok
        });
        ok
    }
}

/// Free-space oracle that accepts everything, for index-only smoothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unbounded;

impl FreeSpace for Unbounded {
    fn segment_free(&self, _a: Vec3, _b: Vec3) -> bool {
        true
    }
}
