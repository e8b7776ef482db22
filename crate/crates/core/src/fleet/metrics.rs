use serde::{Deserialize, Serialize};

use super::{comm_graph, Engine, FleetError, HomingMode, Mode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMetrics {
    pub seed: u64,
    pub robots: usize,
    pub homing_mode: HomingMode,
    pub mission_time: f64,
    /// Known cells of the merged map times the cell volume (m³).
    pub merged_explored_volume: f64,
    /// Base and every landed robot form one radio-connected component.
    pub relay_connected: bool,
    pub collisions: usize,
    pub clearance_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotMetrics {
    pub id: usize,
    pub policy: String,
    pub final_mode: Mode,
    pub launch_time: Option<f64>,
    pub flight_time: f64,
    pub trajectory_length: f64,
    pub explored_volume: f64,
    /// Launch to the start of homing, or the whole flight if it never homed (s).
    pub exploration_time: f64,
    pub homing_flight_time: Option<f64>,
    pub homing_estimate: Option<f64>,
    pub homing_reason: Option<String>,
    pub landing: Option<[f64; 3]>,
    pub relay_landing: bool,
    pub stranded: bool,
    pub collided: bool,
    pub clearance_violations: usize,
    pub goals_planned: usize,
    pub baseline_exploration_time: Option<f64>,
    /// Exploration time gained over the return-to-base run (%).
    pub exploration_time_increase: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionMetrics {
    pub mission: GlobalMetrics,
    pub robot: Vec<RobotMetrics>,
}

impl MissionMetrics {
    pub fn from_engine(engine: &Engine) -> Self {
        let cfg = engine.config();
        let mut robot = Vec::with_capacity(engine.robot_count());
        let mut landed = vec![engine.world().base_station()];
        for (i, s) in engine.robots().enumerate() {
            let st = engine.stats(i);
            let exploration_time = match (st.launch_time, st.homing_start) {
                (Some(l), Some(h)) => h - l,
                (Some(_), None) => st.flight_time,
                _ => 0.0,
            };
            if s.mode == Mode::Landed {
                landed.push(s.position);
            }
            robot.push(RobotMetrics {
                id: i,
                policy: cfg.policy_of(i).name().to_string(),
                final_mode: s.mode,
                launch_time: st.launch_time,
                flight_time: st.flight_time,
                trajectory_length: st.trajectory_length,
                explored_volume: engine.map(i).explored_volume(),
                exploration_time,
                homing_flight_time: match (st.homing_start, st.landing_time) {
                    (Some(h), Some(l)) => Some(l - h),
                    _ => None,
                },
                homing_estimate: st.homing_estimate,
                homing_reason: st.homing_reason.clone(),
                landing: (s.mode == Mode::Landed && st.launch_time.is_some()).then(|| s.position.to_array()),
                relay_landing: st.relay_landing,
                stranded: st.stranded,
                collided: st.collided,
                clearance_violations: st.clearance_violations,
                goals_planned: st.goals_planned,
                baseline_exploration_time: None,
                exploration_time_increase: None,
            });
        }
        let mission = GlobalMetrics {
            seed: cfg.seed,
            robots: cfg.robots,
            homing_mode: cfg.homing_mode,
            mission_time: engine.time(),
            merged_explored_volume: engine.merged_map().explored_volume(),
            relay_connected: comm_graph(&landed, cfg.homing.d_c).is_connected(),
            collisions: robot.iter().filter(|r| r.collided).count(),
            clearance_violations: robot.iter().map(|r| r.clearance_violations).sum(),
        };
        Self { mission, robot }
    }

    /// Fills the comparison fields from a return-to-base run of the same
    /// configuration.
    pub fn attach_baseline(&mut self, baseline: &MissionMetrics) {
        for (r, b) in self.robot.iter_mut().zip(&baseline.robot) {
            r.baseline_exploration_time = Some(b.exploration_time);
            r.exploration_time_increase =
                (b.exploration_time > 0.0).then(|| 100.0 * (r.exploration_time - b.exploration_time) / b.exploration_time);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("metrics serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self, FleetError> {
        toml::from_str(text).map_err(|e| FleetError::Format(e.to_string()))
    }
}
