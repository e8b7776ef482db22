//! Deterministic multi-robot cave exploration toolkit.
//!
//! The crate is organised bottom-up:
//!
//! - [`worldsim`]: ground-truth voxel worlds, cave generation, simulated LiDAR
//!   with dust injection, segment clearance queries.
//! - [`mapping`]: tri-state log-odds occupancy map, intensity filtering,
//!   frontier extraction and map accuracy evaluation.
//! - [`pathplan`]: KD-tree obstacle index, pessimistic A* on the belief map,
//!   clearance post-processing and shortcutting.
//! - [`motion`]: velocity-adaptive trajectory sampling, jerk-limited
//!   reference tracking and stop-free trajectory appending.
//! - [`homing`]: the shared homing tree of pose and communication nodes.
//! - [`fleet`]: the discrete-time mission engine tying everything together.
//! - [`cli`]: scenario files and the command implementations behind the
//!   `cavenav` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN-rejecting range checks

pub mod cli;
pub mod fleet;
pub mod homing;
pub mod mapping;
pub mod motion;
pub mod pathplan;
pub mod spatial;
pub mod worldsim;

pub use glam::{DVec3 as Vec3, IVec3 as VoxelKey};
