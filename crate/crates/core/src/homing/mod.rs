//! Homing tree shared by the fleet: past poses and communication nodes
//! linked by estimated flight time, used to route a robot with a draining
//! battery to the nearest place where it can land within radio range of the
//! relay chain.

mod codec;
mod route;
mod tree;

pub use codec::{decode_tree, encode_tree, TREE_MAGIC, TREE_VERSION};
pub use route::{homing_estimate, homing_path, homing_trigger, HomingRoute};
pub use tree::{merge_trees, HomingTree, Insertion, Node, NodeId, NodeKind, Rejection};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::worldsim::GroundTruthWorld;
use crate::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum HomingError {
    #[error("invalid homing parameters: {0}")]
    Params(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no homing path from {0}")]
    NoHomingPath(Vec3),
    #[error("trees are incompatible: {0}")]
    Incompatible(String),
    #[error("malformed tree record: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomingParams {
    /// Minimum distance between a new pose node and any existing node (m).
    pub d_e: f64,
    /// Communication radius (m).
    pub d_c: f64,
    /// Speed assumed by the flight-time estimate (m/s).
    pub v_nominal: f64,
    /// Battery margin kept on top of the homing estimate (s).
    pub reserve_time: f64,
}

impl Default for HomingParams {
    fn default() -> Self {
        Self { d_e: 1.0, d_c: 50.0, v_nominal: 1.2, reserve_time: 30.0 }
    }
}

impl HomingParams {
    pub fn validate(&self) -> Result<(), HomingError> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.d_e) && pos(self.d_c) && pos(self.v_nominal) && pos(self.reserve_time)) {
            return Err(HomingError::Params("d_e, d_c, v_nominal and reserve_time must be positive".into()));
        }
        if self.d_e >= self.d_c {
            return Err(HomingError::Params("d_e must be smaller than d_c".into()));
        }
        Ok(())
    }
}

/// Flight-time estimate between two positions.
pub fn cost(a: Vec3, b: Vec3, params: &HomingParams) -> f64 {
    a.distance(b) / params.v_nominal
}

/// Line-of-flight test between two nodes.
pub trait FreeRay {
    fn free_ray(&self, a: Vec3, b: Vec3) -> bool;
}

impl<F: Fn(Vec3, Vec3) -> bool> FreeRay for F {
    fn free_ray(&self, a: Vec3, b: Vec3) -> bool {
        self(a, b)
    }
}

/// Ground-truth segment check with a clearance margin.
#[derive(Debug, Clone, Copy)]
pub struct WorldRay<'a> {
    pub world: &'a GroundTruthWorld,
    pub clearance: f64,
}

impl FreeRay for WorldRay<'_> {
    fn free_ray(&self, a: Vec3, b: Vec3) -> bool {
        self.world.collision_free_segment(a, b, self.clearance)
    }
}
