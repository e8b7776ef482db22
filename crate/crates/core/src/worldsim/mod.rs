//! Ground-truth environment: voxel worlds, cave generation, simulated sensing
//! and clearance queries.

mod cave;
mod format;
mod sensor;
mod world;

pub use cave::{generate_cave, CaveParams, WorldBuilder};
pub use format::{load_world, parse_world, save_world, write_world, WORLD_MAGIC};
pub use sensor::{simulate_scan, Pose, Return, Scan, SensorModel, DUST_INTENSITY_MAX, SURFACE_INTENSITY_MIN};
pub use world::GroundTruthWorld;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid world: {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("free space is not connected: {reachable} of {free} free voxels reachable from the base station")]
    Disconnected { reachable: usize, free: usize },
    #[error("cave generation failed: {0}")]
    Generation(String),
    #[error("world file parse error at {field}: {reason}")]
    Parse { field: String, reason: String },
    #[error("pose {0:?} is outside the world extents")]
    OutOfExtents(crate::Vec3),
    #[error("invalid sensor model: {0}")]
    Sensor(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
