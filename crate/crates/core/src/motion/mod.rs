//! Path-to-trajectory conversion: the velocity-adaptive sampler, a
//! jerk-limited reference tracker running at 100 Hz, and stop-free appending
//! of new path pieces onto the active trajectory.

mod append;
mod sampler;
mod tracker;
mod trajectory;

pub use append::append_trajectory;
pub use sampler::{
    required_acceleration, sample_distances, sample_trajectory, sample_trajectory_with, segment_profile,
    segment_velocities, uniform_resample, vertex_velocities, SampleOptions, SampledTrajectory, SegmentEntry,
    SegmentProfile,
};
pub(crate) use sampler::TANGENTIAL_SHARE;
pub use tracker::{reference_at, track, ReferenceState, Tracker, TrackerGains, TRACKER_RATE};
pub use trajectory::{parse_trajectory, write_trajectory, TrajSample, Trajectory};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("invalid motion constraints: {0}")]
    InvalidConstraints(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("index {index} out of range for {len} elements")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("path has no waypoints")]
    EmptyPath,
    #[error("cannot append: {0}")]
    Append(String),
    #[error("malformed trajectory file: {0}")]
    Format(String),
}

/// Kinematic limits shared by the sampler and the tracker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionConstraints {
    pub v_max: f64,
    pub v_min: f64,
    pub a_max: f64,
    pub j_max: f64,
    /// Trajectory sampling period (s).
    pub t_s: f64,
    /// rad/s.
    pub heading_rate_max: f64,
}

impl Default for MotionConstraints {
    fn default() -> Self {
        Self { v_max: 2.0, v_min: 0.3, a_max: 2.0, j_max: 20.0, t_s: 0.2, heading_rate_max: 1.5 }
    }
}

impl MotionConstraints {
    pub fn validate(&self) -> Result<(), MotionError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(self.v_min) && self.v_min <= self.v_max && self.v_max.is_finite()) {
            return Err(MotionError::InvalidConstraints("need 0 < v_min <= v_max".into()));
        }
        for (name, v) in [("a_max", self.a_max), ("j_max", self.j_max), ("t_s", self.t_s), ("heading_rate_max", self.heading_rate_max)] {
            if !ok(v) {
                return Err(MotionError::InvalidConstraints(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Spacing of the uniform initial resampling.
    pub fn spacing(&self) -> f64 {
        self.v_max * self.t_s
    }
}
