use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use crate::homing::HomingParams;
use crate::mapping::MapParams;
use crate::motion::MotionConstraints;
use crate::worldsim::{generate_cave, load_world, CaveParams, GroundTruthWorld, SensorModel, WorldBuilder};
use crate::Vec3;

use super::FleetError;

/// Robot ids are packed into node ids with four bits.
pub const MAX_ROBOTS: usize = 15;

/// Frontier selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Smallest angle between the flight direction and the frontier.
    DeepLateral,
    /// Highest frontier.
    HighestFrontier,
    /// Largest unknown-to-free ratio around the frontier.
    UnknownRatio,
    /// Nearest frontier inside the coverage bounds.
    FullCoverageBounded,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::DeepLateral => "deep_lateral",
            Policy::HighestFrontier => "highest_frontier",
            Policy::UnknownRatio => "unknown_ratio",
            Policy::FullCoverageBounded => "full_coverage_bounded",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = FleetError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Policy::DeepLateral, Policy::HighestFrontier, Policy::UnknownRatio, Policy::FullCoverageBounded]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| FleetError::Config(format!("unknown policy {s:?}")))
    }
}

/// What a robot does when its battery runs low.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomingMode {
    /// Land within radio range of the relay chain; landed robots extend it.
    Relay,
    /// Always fly back into range of the base station.
    ReturnToBase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorldSpec {
    /// World file, relative paths resolved against the scenario directory.
    File { path: PathBuf },
    Generated {
        seed: u64,
        #[serde(default)]
        params: CaveParams,
    },
    Corridor { resolution: f64, length: f64, width: f64, height: f64 },
    Room { resolution: f64, size: [f64; 3] },
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec::Generated { seed: 1, params: CaveParams::default() }
    }
}

impl WorldSpec {
    pub fn build(&self, base_dir: Option<&FsPath>, spawn_count: usize) -> Result<GroundTruthWorld, FleetError> {
        let w = match self {
            WorldSpec::File { path } => {
                let p = match base_dir {
                    Some(d) if path.is_relative() => d.join(path),
                    _ => path.clone(),
                };
                load_world(&p)?
            }
            WorldSpec::Generated { seed, params } => generate_cave(*seed, params)?,
            WorldSpec::Corridor { resolution, length, width, height } => {
                WorldBuilder::corridor(*resolution, *length, *width, *height, spawn_count)?
            }
            WorldSpec::Room { resolution, size } => WorldBuilder::box_room(*resolution, Vec3::from_array(*size), spawn_count)?,
        };
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Required obstacle clearance (m).
    pub d_min: f64,
    /// Margin around start and goal bounding the search region (m).
    pub region_margin: f64,
    pub max_expansions: usize,
    pub postprocess_iters: usize,
    /// A new goal is chosen once less than this much trajectory is left (s).
    pub horizon: f64,
    /// Frontiers closer than this are skipped (m).
    pub min_goal_distance: f64,
    /// Edge of the cells frontiers are clustered into (m).
    pub cluster_size: f64,
    /// Goals tried per decision before giving up until the next one.
    pub max_goal_attempts: usize,
    /// Samples ahead of the current one that new plans start from.
    pub lookahead: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            d_min: 0.7,
            region_margin: 8.0,
            max_expansions: 400_000,
            postprocess_iters: 8,
            horizon: 1.5,
            min_goal_distance: 2.0,
            cluster_size: 2.0,
            max_goal_attempts: 6,
            lookahead: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Returns within this range are candidates for removal (m).
    pub neighborhood: f64,
    pub percentile: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { neighborhood: 3.0, percentile: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionConfig {
    pub world: WorldSpec,
    pub robots: usize,
    /// Launch interval between consecutive robots (s).
    pub stagger: f64,
    /// Robot `i` uses `policies[i % len]`.
    pub policies: Vec<Policy>,
    pub motion: MotionConstraints,
    pub homing: HomingParams,
    pub homing_mode: HomingMode,
    pub sensor: SensorModel,
    pub map: MapParams,
    pub planner: PlannerConfig,
    pub filter: FilterConfig,
    /// Flight time per robot (s).
    pub battery_budget: f64,
    pub seed: u64,
    /// Simulation step (s).
    pub dt: f64,
    /// Half-size of the cube the unknown ratio is evaluated in (m).
    pub ratio_half_size: f64,
    /// Half-size of the coverage bounds around the base station (m).
    pub coverage_half_size: f64,
    /// Travel between pose-node candidates (m).
    pub pose_spacing: f64,
    /// Clearance of tree links; `None` uses `d_min - resolution / 2`.
    pub ray_clearance: Option<f64>,
    /// Standard deviation of the position error of each scan's origin (m).
    pub pose_noise_sigma: f64,
    /// Simulated time limit (s).
    pub max_time: f64,
    /// Also run every robot with return-to-base homing and report the
    /// exploration time gained.
    pub compare_baseline: bool,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            world: WorldSpec::default(),
            robots: 3,
            stagger: 60.0,
            policies: vec![Policy::DeepLateral],
            motion: MotionConstraints::default(),
            homing: HomingParams::default(),
            homing_mode: HomingMode::Relay,
            sensor: SensorModel::default(),
            map: MapParams::default(),
            planner: PlannerConfig::default(),
            filter: FilterConfig::default(),
            battery_budget: 300.0,
            seed: 0,
            dt: 0.1,
            ratio_half_size: 10.0,
            coverage_half_size: 30.0,
            pose_spacing: 2.0,
            ray_clearance: None,
            pose_noise_sigma: 0.0,
            max_time: 7200.0,
            compare_baseline: false,
        }
    }
}

impl MissionConfig {
    pub fn from_toml(text: &str) -> Result<Self, FleetError> {
        let c: Self = toml::from_str(text).map_err(|e| FleetError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &FsPath) -> Result<Self, FleetError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("mission config serializes")
    }

    pub fn validate(&self) -> Result<(), FleetError> {
        let bad = |m: String| Err(FleetError::Config(m));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if self.robots == 0 || self.robots > MAX_ROBOTS {
            return bad(format!("robots must lie in 1..={MAX_ROBOTS}"));
        }
        if self.policies.is_empty() {
            return bad("at least one policy is required".into());
        }
        self.motion.validate()?;
        self.homing.validate()?;
        self.sensor.validate()?;
        self.map.validate()?;
        if !pos(self.dt) || self.dt > self.motion.t_s + 1e-12 {
            return bad(format!("dt must lie in (0, t_s = {}]", self.motion.t_s));
        }
        if !pos(self.battery_budget) {
            return bad("battery_budget must be positive".into());
        }
        if !(self.stagger >= 0.0 && self.stagger.is_finite()) {
            return bad("stagger must be non-negative".into());
        }
        if !pos(self.max_time) || !pos(self.pose_spacing) || !pos(self.ratio_half_size) || !pos(self.coverage_half_size) {
            return bad("max_time, pose_spacing, ratio_half_size and coverage_half_size must be positive".into());
        }
        let p = &self.planner;
        if !pos(p.d_min) || !pos(p.region_margin) || !pos(p.horizon) || !pos(p.cluster_size) || p.min_goal_distance < 0.0 {
            return bad("planner distances and horizon must be positive".into());
        }
        if p.max_goal_attempts == 0 || p.max_expansions == 0 {
            return bad("max_goal_attempts and max_expansions must be positive".into());
        }
        if !(self.filter.percentile >= 0.0 && self.filter.percentile <= 1.0) || self.filter.neighborhood < 0.0 {
            return bad("filter percentile must lie in [0, 1] and neighborhood be non-negative".into());
        }
        if !(self.pose_noise_sigma >= 0.0) {
            return bad("pose_noise_sigma must be non-negative".into());
        }
        if let Some(c) = self.ray_clearance {
            if !(c >= 0.0) {
                return bad("ray_clearance must be non-negative".into());
            }
        }
        Ok(())
    }

    pub fn policy_of(&self, robot: usize) -> Policy {
        self.policies[robot % self.policies.len()]
    }

    /// Clearance required of tree links. Half a voxel above the safety margin
    /// `d_min - resolution`, since links are checked at sample points only.
    pub fn link_clearance(&self) -> f64 {
        self.ray_clearance.unwrap_or((self.planner.d_min - 0.5 * self.map.resolution).max(0.0))
    }
}
