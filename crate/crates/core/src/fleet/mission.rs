use std::fs;
use std::path::Path as FsPath;

use crate::homing::{encode_tree, HomingTree};
use crate::mapping::{write_map_ascii, OccupancyMap};
use crate::motion::{write_trajectory, TrajSample, Trajectory};
use crate::worldsim::GroundTruthWorld;

use super::{Engine, Event, FleetError, HomingMode, MissionConfig, MissionMetrics};

pub const METRICS_FILE: &str = "metrics.toml";
pub const BASELINE_METRICS_FILE: &str = "baseline_metrics.toml";
pub const EVENTS_FILE: &str = "events.log";
pub const MAP_FILE: &str = "merged_map.txt";
pub const TREE_FILE: &str = "homing_tree.bin";

/// Everything a finished mission leaves behind.
#[derive(Debug, Clone)]
pub struct MissionOutcome {
    pub metrics: MissionMetrics,
    pub baseline: Option<MissionMetrics>,
    pub events: Vec<Event>,
    /// Flown positions every `t_s`, per robot.
    pub trajectories: Vec<Trajectory>,
    pub merged_map: OccupancyMap,
    /// The base station's replica.
    pub tree: HomingTree,
}

pub fn trajectory_file_name(robot: usize) -> String {
    format!("robot_{robot}.traj")
}

/// One run of `config` as given, without a baseline.
pub fn simulate(world: &GroundTruthWorld, config: &MissionConfig) -> Result<MissionOutcome, FleetError> {
    let mut engine = Engine::new(world, config.clone())?;
    engine.run_to_end()?;
    Ok(MissionOutcome::from_engine(&engine))
}

/// Runs the mission in `world`; with `compare_baseline` set on a relay
/// mission, reruns it with return-to-base homing and fills the
/// exploration-time comparison.
pub fn run_mission_in(world: &GroundTruthWorld, config: &MissionConfig) -> Result<MissionOutcome, FleetError> {
    let mut out = simulate(world, config)?;
    if config.compare_baseline && config.homing_mode == HomingMode::Relay {
        let base_cfg = MissionConfig { homing_mode: HomingMode::ReturnToBase, ..config.clone() };
        let baseline = simulate(world, &base_cfg)?.metrics;
        out.metrics.attach_baseline(&baseline);
        out.baseline = Some(baseline);
    }
    Ok(out)
}

/// Builds the configured world (relative world files resolve against
/// `base_dir`) and runs the mission in it.
pub fn run_mission(config: &MissionConfig, base_dir: Option<&FsPath>) -> Result<MissionOutcome, FleetError> {
    config.validate()?;
    let world = config.world.build(base_dir, config.robots)?;
    run_mission_in(&world, config)
}

impl MissionOutcome {
    /// Snapshot of the engine's current state; also usable after a failed step.
    pub fn from_engine(engine: &Engine<'_>) -> Self {
        let t_s = engine.config().motion.t_s;
        let trajectories = (0..engine.robot_count())
            .map(|i| {
                let samples = engine.track_log(i).iter().map(|&(_, position, heading)| TrajSample { position, heading }).collect();
                Trajectory::new(samples, t_s)
            })
            .collect();
        Self {
            metrics: MissionMetrics::from_engine(engine),
            baseline: None,
            events: engine.events().to_vec(),
            trajectories,
            merged_map: engine.merged_map(),
            tree: engine.base_tree().clone(),
        }
    }

    pub fn events_text(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            s.push_str(&e.to_string());
            s.push('\n');
        }
        s
    }

    pub fn write_artifacts(&self, dir: &FsPath) -> Result<(), FleetError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(METRICS_FILE), self.metrics.to_toml())?;
        if let Some(b) = &self.baseline {
            fs::write(dir.join(BASELINE_METRICS_FILE), b.to_toml())?;
        }
        fs::write(dir.join(EVENTS_FILE), self.events_text())?;
        for (i, t) in self.trajectories.iter().enumerate() {
            fs::write(dir.join(trajectory_file_name(i)), write_trajectory(t))?;
        }
        fs::write(dir.join(MAP_FILE), write_map_ascii(&self.merged_map))?;
        fs::write(dir.join(TREE_FILE), encode_tree(&self.tree))?;
        Ok(())
    }
}
