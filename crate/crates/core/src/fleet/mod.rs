//! Discrete-time fleet simulation: each robot scans, maps, picks frontiers,
//! plans and tracks on its own; trees are exchanged whenever robots are in
//! radio range, and low batteries send robots home along the homing tree.

mod comm;
mod config;
mod engine;
mod experiment;
mod metrics;
mod mission;
mod policy;

pub use comm::{comm_graph, CommGraph};
pub use config::{FilterConfig, HomingMode, MissionConfig, PlannerConfig, Policy, WorldSpec, MAX_ROBOTS};
pub use engine::{Engine, Event, Mode, RobotState, RobotStats, BASE_NODE};
pub use experiment::{homing_experiment, repetition_config, ExperimentTable, Repetition};
pub use metrics::{GlobalMetrics, MissionMetrics, RobotMetrics};
pub use mission::{
    run_mission, run_mission_in, simulate, trajectory_file_name, MissionOutcome, BASELINE_METRICS_FILE, EVENTS_FILE,
    MAP_FILE, METRICS_FILE, TREE_FILE,
};
pub use policy::{rank_goals, select_goal, GoalChoice, GoalContext};

use thiserror::Error;

use crate::homing::HomingError;
use crate::mapping::MapError;
use crate::motion::MotionError;
use crate::worldsim::WorldError;

#[derive(Debug, Error)]
pub enum FleetError {
    #[error("invalid mission config: {0}")]
    Config(String),
    #[error("no robot {0}")]
    UnknownRobot(usize),
    #[error("malformed metrics: {0}")]
    Format(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Homing(#[from] HomingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
