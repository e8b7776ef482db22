use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::homing::{
    homing_estimate, homing_path, homing_trigger, merge_trees, HomingTree, NodeId, NodeKind, WorldRay,
};
use crate::mapping::{filter_scan, CellState, OccupancyMap};
use crate::motion::{append_trajectory, TANGENTIAL_SHARE, reference_at, ReferenceState, Tracker, TrackerGains, Trajectory};
use crate::pathplan::{build_obstacle_index, plan_path_with, postprocess_path, shortcut_path, Path, PlanError, PlanOptions};
use crate::spatial::{Aabb, FACE_NEIGHBORS};
use crate::worldsim::{simulate_scan, GroundTruthWorld, Pose};
use crate::{Vec3, VoxelKey};

use super::policy::{rank_goals, GoalContext};
use super::{FleetError, HomingMode, MissionConfig, Policy};

/// Base station node id in every tree.
pub const BASE_NODE: NodeId = 0;
const COMM_ID_FLAG: NodeId = 1 << 63;
const BREADCRUMB_SPACING: f64 = 0.5;
const LANDING_TOLERANCE: f64 = 0.3;
/// Unreachable goals are retried after this long (s), since sparse returns
/// leave gaps that close as the robot approaches.
const GOAL_RETRY_DELAY: f64 = 10.0;
const MAX_GOAL_FAILURES: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Idle,
    Exploring,
    Homing,
    Landed,
    Failed,
}

impl Mode {
    pub fn is_airborne(self) -> bool {
        matches!(self, Mode::Exploring | Mode::Homing)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Idle => "idle",
            Mode::Exploring => "exploring",
            Mode::Homing => "homing",
            Mode::Landed => "landed",
            Mode::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub id: usize,
    pub position: Vec3,
    pub velocity: Vec3,
    pub heading: f64,
    /// Seconds of flight left.
    pub battery_remaining: f64,
    pub mode: Mode,
    pub trajectory: Trajectory,
    /// Index of the trajectory sample most recently passed.
    pub progress: usize,
}

/// Per-robot bookkeeping the metrics are built from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RobotStats {
    pub launch_time: Option<f64>,
    pub homing_start: Option<f64>,
    pub landing_time: Option<f64>,
    pub flight_time: f64,
    pub trajectory_length: f64,
    /// Homing cost estimate when homing began (s).
    pub homing_estimate: Option<f64>,
    pub homing_reason: Option<String>,
    /// Became a relay node on touchdown.
    pub relay_landing: bool,
    /// Landed with an empty battery away from a planned landing spot.
    pub stranded: bool,
    pub collided: bool,
    /// Ticks spent closer than `d_min - resolution` to ground-truth rock.
    pub clearance_violations: usize,
    pub goals_planned: usize,
    pub plan_failures: usize,
    pub scans: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub robot: Option<usize>,
    pub text: String,
}

impl std::fmt::Display for Event {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.robot {
            Some(r) => write!(f, "{:.2} robot {} {}", self.time, r, self.text),
            None => write!(f, "{:.2} base {}", self.time, self.text),
        }
    }
}

struct Robot {
    state: RobotState,
    policy: Policy,
    map: OccupancyMap,
    tracker: Tracker,
    /// Mission time of trajectory sample 0.
    t0: f64,
    tree: HomingTree,
    generation: u64,
    launch_time: f64,
    battery_override: Option<f64>,
    next_scan: f64,
    last_record: Vec3,
    breadcrumbs: Vec<Vec3>,
    goal: Option<VoxelKey>,
    excluded: FxHashSet<VoxelKey>,
    /// Failure count and retry time of goals that could not be planned to.
    failed_goals: FxHashMap<VoxelKey, (u32, f64)>,
    last_plan: f64,
    track_log: Vec<(f64, Vec3, f64)>,
    next_log: f64,
    noise: ChaCha8Rng,
    stats: RobotStats,
}

enum PlanOutcome {
    Planned,
    Deferred,
    Exhausted,
}

/// Discrete-time mission state.
pub struct Engine<'w> {
    world: &'w GroundTruthWorld,
    config: MissionConfig,
    time: f64,
    tick: u64,
    base_tree: HomingTree,
    base_generation: u64,
    robots: Vec<Robot>,
    merged_at: FxHashMap<(usize, usize), (u64, u64)>,
    next_generation: u64,
    events: Vec<Event>,
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl<'w> Engine<'w> {
    pub fn new(world: &'w GroundTruthWorld, config: MissionConfig) -> Result<Self, FleetError> {
        config.validate()?;
        let base = world.base_station();
        let base_tree = HomingTree::new(BASE_NODE, base, config.homing)?;
        let spawns = world.spawn_points();
        let mut robots = Vec::with_capacity(config.robots);
        for i in 0..config.robots {
            let spawn = if spawns.is_empty() { base } else { spawns[i % spawns.len()] };
            let rest = ReferenceState::at_rest(spawn, 0.0);
            robots.push(Robot {
                state: RobotState {
                    id: i,
                    position: spawn,
                    velocity: Vec3::ZERO,
                    heading: 0.0,
                    battery_remaining: config.battery_budget,
                    mode: Mode::Idle,
                    trajectory: Trajectory::hover(spawn, 0.0, config.motion.t_s),
                    progress: 0,
                },
                policy: config.policy_of(i),
                map: OccupancyMap::new(config.map)?,
                tracker: Tracker::new(rest, TrackerGains::default(), config.motion)?,
                t0: 0.0,
                tree: base_tree.clone(),
                generation: 0,
                launch_time: i as f64 * config.stagger,
                battery_override: None,
                next_scan: 0.0,
                last_record: spawn,
                breadcrumbs: vec![spawn],
                goal: None,
                excluded: FxHashSet::default(),
                failed_goals: FxHashMap::default(),
                last_plan: f64::NEG_INFINITY,
                track_log: Vec::new(),
                next_log: 0.0,
                noise: ChaCha8Rng::seed_from_u64(mix(config.seed ^ 0x6E_6F69_7365, i as u64)),
                stats: RobotStats::default(),
            });
        }
        Ok(Self {
            world,
            config,
            time: 0.0,
            tick: 0,
            base_tree,
            base_generation: 0,
            robots,
            merged_at: FxHashMap::default(),
            next_generation: 1,
            events: Vec::new(),
        })
    }

    pub fn config(&self) -> &MissionConfig {
        &self.config
    }

    pub fn world(&self) -> &GroundTruthWorld {
        self.world
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn robot_count(&self) -> usize {
        self.robots.len()
    }

    pub fn robot(&self, i: usize) -> &RobotState {
        &self.robots[i].state
    }

    pub fn robots(&self) -> impl Iterator<Item = &RobotState> {
        self.robots.iter().map(|r| &r.state)
    }

    pub fn stats(&self, i: usize) -> &RobotStats {
        &self.robots[i].stats
    }

    pub fn map(&self, i: usize) -> &OccupancyMap {
        &self.robots[i].map
    }

    pub fn tree(&self, i: usize) -> &HomingTree {
        &self.robots[i].tree
    }

    pub fn base_tree(&self) -> &HomingTree {
        &self.base_tree
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Positions every `t_s` while airborne: (time, position, heading).
    pub fn track_log(&self, i: usize) -> &[(f64, Vec3, f64)] {
        &self.robots[i].track_log
    }

    /// Replaces the launch battery of a robot that has not launched yet.
    pub fn set_battery(&mut self, i: usize, seconds: f64) -> Result<(), FleetError> {
        let r = self.robots.get_mut(i).ok_or(FleetError::UnknownRobot(i))?;
        if r.state.mode != Mode::Idle {
            return Err(FleetError::Config(format!("robot {i} has already launched")));
        }
        if !(seconds >= 0.0 && seconds.is_finite()) {
            return Err(FleetError::Config("battery must be non-negative".into()));
        }
        r.battery_override = Some(seconds);
        r.state.battery_remaining = seconds;
        Ok(())
    }

    /// All robots landed or failed, or the time limit reached.
    pub fn is_finished(&self) -> bool {
        self.time >= self.config.max_time - 1e-9
            || self.robots.iter().all(|r| matches!(r.state.mode, Mode::Landed | Mode::Failed))
    }

    pub fn run_to_end(&mut self) -> Result<(), FleetError> {
        let dt = self.config.dt;
        while !self.is_finished() {
            self.step(dt)?;
        }
        Ok(())
    }

    fn event(&mut self, time: f64, robot: Option<usize>, text: String) {
        log::debug!("{time:.2} {robot:?} {text}");
        self.events.push(Event { time, robot, text });
    }

    fn fresh_generation(&mut self) -> u64 {
        self.next_generation += 1;
        self.next_generation
    }

    fn ray(&self) -> WorldRay<'w> {
        WorldRay { world: self.world, clearance: self.config.link_clearance() }
    }

    pub fn step(&mut self, dt: f64) -> Result<(), FleetError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(FleetError::Config("dt must be positive".into()));
        }
        for i in 0..self.robots.len() {
            if self.robots[i].state.mode == Mode::Idle && self.robots[i].launch_time <= self.time + 1e-9 {
                self.launch(i);
            }
        }
        let t1 = self.time + dt;
        for i in 0..self.robots.len() {
            if self.robots[i].state.mode.is_airborne() {
                self.advance(i, dt, t1)?;
            }
        }
        self.merge_in_range(t1)?;
        self.time = t1;
        self.tick += 1;
        Ok(())
    }

    fn launch(&mut self, i: usize) {
        let now = self.time;
        let budget = self.robots[i].battery_override.unwrap_or(self.config.battery_budget);
        let r = &mut self.robots[i];
        r.state.battery_remaining = budget.max(0.0);
        if budget <= 0.0 {
            r.state.mode = Mode::Landed;
            self.event(now, Some(i), "landed without takeoff: empty battery".into());
            return;
        }
        let p = r.state.position;
        r.state.mode = Mode::Exploring;
        r.state.trajectory = Trajectory::hover(p, r.state.heading, self.config.motion.t_s);
        r.state.progress = 0;
        r.t0 = now;
        r.tracker.reset(ReferenceState::at_rest(p, r.state.heading));
        r.next_scan = now;
        r.next_log = now;
        r.stats.launch_time = Some(now);
        r.tree = self.base_tree.clone();
        r.generation = self.base_generation;
        let text = format!("launch at {} policy {}", fmt_p(p), r.policy.name());
        self.event(now, Some(i), text);
    }

    fn advance(&mut self, i: usize, dt: f64, t1: f64) -> Result<(), FleetError> {
        let t_s = self.config.motion.t_s;
        let d_min = self.config.planner.d_min;
        let res = self.config.map.resolution;
        {
            let r = &mut self.robots[i];
            let h = r.tracker.dt();
            let n = ((dt / h).round() as usize).max(1);
            let t_start = t1 - dt;
            let mut prev = r.state.position;
            for k in 1..=n {
                let t = t_start + k as f64 * dt / n as f64;
                let reference = reference_at(&r.state.trajectory, t - r.t0);
                let s = r.tracker.step(&reference);
                r.stats.trajectory_length += s.position.distance(prev);
                prev = s.position;
            }
            let s = *r.tracker.state();
            r.state.position = s.position;
            r.state.velocity = s.velocity;
            r.state.heading = s.heading;
            // Hovering at the end: keep the last sample at the current time
            // so a splice continues from now, not from the past.
            let duration = r.state.trajectory.duration();
            if t1 - r.t0 > duration {
                r.t0 = t1 - duration;
            }
            let last = r.state.trajectory.len() - 1;
            r.state.progress = (((t1 - r.t0) / t_s + 1e-9).floor().max(0.0) as usize).min(last);
            if r.breadcrumbs.last().unwrap().distance(s.position) >= BREADCRUMB_SPACING {
                r.breadcrumbs.push(s.position);
            }
            while r.next_log <= t1 + 1e-9 {
                r.track_log.push((r.next_log, s.position, s.heading));
                r.next_log += t_s;
            }
            r.state.battery_remaining = (r.state.battery_remaining - dt).max(0.0);
            r.stats.flight_time += dt;
        }
        let pos = self.robots[i].state.position;
        if self.world.is_occupied_at(pos) {
            let r = &mut self.robots[i];
            r.state.mode = Mode::Failed;
            r.state.velocity = Vec3::ZERO;
            r.stats.collided = true;
            self.event(t1, Some(i), format!("collision at {}", fmt_p(pos)));
            return Ok(());
        }
        if !self.world.is_clear(pos, (d_min - res).max(0.0)) {
            self.robots[i].stats.clearance_violations += 1;
        }

        if self.robots[i].last_record.distance(pos) >= self.config.pose_spacing {
            self.robots[i].last_record = pos;
            let id = self.tick * 16 + i as u64 + 1;
            let ray = self.ray();
            if self.robots[i].tree.insert(id, NodeKind::Pose, pos, &ray).is_inserted() {
                self.robots[i].generation = self.fresh_generation();
                self.event(t1, Some(i), format!("insert pose {id} at {}", fmt_p(pos)));
            }
        }

        if self.robots[i].state.mode == Mode::Homing && self.reached_landing(i, t1) {
            self.land(i, t1, false);
            return Ok(());
        }
        if self.robots[i].state.battery_remaining <= 0.0 {
            self.land(i, t1, true);
            return Ok(());
        }

        if self.robots[i].next_scan <= t1 + 1e-9 {
            self.scan(i, t1)?;
        }
        Ok(())
    }

    fn reached_landing(&self, i: usize, t1: f64) -> bool {
        let r = &self.robots[i];
        let end = r.state.trajectory.samples.last().unwrap().position;
        t1 - r.t0 >= r.state.trajectory.duration() - 1e-9
            && r.state.position.distance(end) <= LANDING_TOLERANCE
            && r.state.velocity.length() <= LANDING_TOLERANCE
    }

    fn land(&mut self, i: usize, t1: f64, stranded: bool) {
        let relay = self.config.homing_mode == HomingMode::Relay;
        let r = &mut self.robots[i];
        if !stranded {
            // Touch down on the planned spot so its radio range is exact.
            r.state.position = r.state.trajectory.samples.last().unwrap().position;
        }
        r.state.mode = Mode::Landed;
        r.state.velocity = Vec3::ZERO;
        r.state.trajectory = Trajectory::hover(r.state.position, r.state.heading, self.config.motion.t_s);
        r.state.progress = 0;
        r.stats.landing_time = Some(t1);
        r.stats.stranded = stranded;
        let pos = r.state.position;
        if stranded {
            self.event(t1, Some(i), format!("battery empty, landed at {}", fmt_p(pos)));
            return;
        }
        self.event(t1, Some(i), format!("landed at {}", fmt_p(pos)));
        if relay {
            let id = COMM_ID_FLAG | (self.tick * 16 + i as u64 + 1);
            let ray = self.ray();
            if self.robots[i].tree.insert(id, NodeKind::LandedRobot, pos, &ray).is_inserted() {
                self.robots[i].stats.relay_landing = true;
                self.robots[i].generation = self.fresh_generation();
                self.event(t1, Some(i), format!("insert landed-robot {id} at {}", fmt_p(pos)));
            }
        }
    }

    fn scan(&mut self, i: usize, t1: f64) -> Result<(), FleetError> {
        let f = self.config.filter;
        let newly = {
            let r = &mut self.robots[i];
            r.next_scan += 1.0 / self.config.sensor.scan_rate;
            let seed = mix(mix(self.config.seed, i as u64 + 1), r.stats.scans);
            r.stats.scans += 1;
            let pose = Pose::new(r.state.position, r.state.heading);
            let mut scan = filter_scan(&simulate_scan(self.world, pose, &self.config.sensor, seed)?, f.neighborhood, f.percentile);
            scan.timestamp = t1;
            if self.config.pose_noise_sigma > 0.0 {
                let n = Normal::new(0.0, self.config.pose_noise_sigma).unwrap();
                let e = Vec3::new(n.sample(&mut r.noise), n.sample(&mut r.noise), n.sample(&mut r.noise));
                scan.origin.position += e;
            }
            r.map.integrate_scan(&scan).newly_occupied
        };
        if self.robots[i].state.mode == Mode::Exploring {
            self.decide(i, t1, &newly);
        }
        Ok(())
    }

    fn remaining_time(&self, i: usize, t1: f64) -> f64 {
        let r = &self.robots[i];
        (r.state.trajectory.duration() - (t1 - r.t0)).max(0.0)
    }

    fn trajectory_blocked(&self, i: usize, newly: &[VoxelKey]) -> bool {
        if newly.is_empty() {
            return false;
        }
        let r = &self.robots[i];
        let margin = (self.config.planner.d_min - self.config.map.resolution).max(0.0);
        let pts: Vec<Vec3> = newly.iter().map(|k| r.map.center_of(*k)).collect();
        r.state.trajectory.samples[r.state.progress..]
            .iter()
            .any(|s| pts.iter().any(|p| p.distance(s.position) < margin))
    }

    fn is_frontier(map: &OccupancyMap, k: VoxelKey) -> bool {
        map.is_free(k) && FACE_NEIGHBORS.iter().any(|o| map.state(k + *o) == CellState::Unknown)
    }

    fn decide(&mut self, i: usize, t1: f64, newly: &[VoxelKey]) {
        let blocked = self.trajectory_blocked(i, newly);
        let ray = self.ray();
        let estimate = {
            let r = &self.robots[i];
            let retrace: f64 =
                r.breadcrumbs.windows(2).map(|w| w[0].distance(w[1])).sum::<f64>() / self.config.homing.v_nominal;
            homing_estimate(&r.tree, r.state.position, &ray, retrace)
        };
        if homing_trigger(self.robots[i].state.battery_remaining, estimate, &self.config.homing) {
            self.start_homing(i, t1, estimate, "battery reserve reached");
            return;
        }
        let remaining = self.remaining_time(i, t1);
        let near_end = remaining < self.config.planner.horizon;
        let stale = {
            let r = &self.robots[i];
            r.goal.is_none_or(|g| !Self::is_frontier(&r.map, g))
        };
        if near_end {
            let r = &mut self.robots[i];
            if let Some(g) = r.goal {
                if Self::is_frontier(&r.map, g) {
                    r.excluded.insert(g);
                }
            }
        }
        let need = blocked || near_end || (stale && t1 - self.robots[i].last_plan >= 1.0);
        if !need {
            return;
        }
        match self.plan_next(i, t1) {
            PlanOutcome::Planned => {}
            PlanOutcome::Exhausted => {
                if blocked || near_end {
                    self.start_homing(i, t1, estimate, "frontiers exhausted");
                }
            }
            PlanOutcome::Deferred => {
                if blocked {
                    self.stop_at_anchor(i);
                }
            }
        }
    }

    /// Sample new plans start from: far enough ahead that the splice can
    /// still slow down to `v_min` before it.
    fn anchor(&self, i: usize) -> (usize, Vec3) {
        let r = &self.robots[i];
        let m = &self.config.motion;
        let brake = ((r.state.velocity.length() - m.v_min).max(0.0) / (TANGENTIAL_SHARE * m.a_max * m.t_s)).ceil() as usize;
        let a = (r.state.progress + self.config.planner.lookahead + brake).min(r.state.trajectory.len() - 1);
        (a, r.state.trajectory.samples[a].position)
    }

    /// Splices `path` (starting at the anchor sample) onto the active
    /// trajectory and drops the samples already flown.
    fn splice(&mut self, i: usize, path: &Path) -> bool {
        let motion = self.config.motion;
        let r = &mut self.robots[i];
        match append_trajectory(&r.state.trajectory, r.state.progress, path, &motion) {
            Ok(mut t) => {
                let k = r.state.progress;
                t.samples.drain(..k);
                t.clamped.drain(..k);
                r.t0 += k as f64 * motion.t_s;
                r.state.progress = 0;
                r.state.trajectory = t;
                true
            }
            Err(e) => {
                log::warn!("robot {i}: append failed: {e}");
                false
            }
        }
    }

    fn stop_at_anchor(&mut self, i: usize) {
        let (_, anchor) = self.anchor(i);
        self.splice(i, &Path::new(vec![anchor]));
    }

    fn plan_next(&mut self, i: usize, t1: f64) -> PlanOutcome {
        let (_, anchor) = self.anchor(i);
        let pc = self.config.planner.clone();
        let res = self.config.map.resolution;
        let base = self.world.base_station();
        let mut skip = self.robots[i].excluded.clone();
        let mut pending = false;
        for (k, &(_, until)) in &self.robots[i].failed_goals {
            if until > t1 {
                skip.insert(*k);
                pending = true;
            }
        }
        let ranked = {
            let r = &self.robots[i];
            let v = r.state.velocity;
            let direction =
                if v.length() > 0.2 { v } else { Vec3::new(r.state.heading.cos(), r.state.heading.sin(), 0.0) };
            let ctx = GoalContext {
                position: anchor,
                direction,
                bounds: Some(Aabb::around(base, self.config.coverage_half_size)),
                ratio_half_size: self.config.ratio_half_size,
                min_distance: pc.min_goal_distance,
                cluster_size: pc.cluster_size,
                excluded: &skip,
            };
            rank_goals(r.policy, &r.map, &ctx)
        };
        if ranked.is_empty() {
            return if pending { PlanOutcome::Deferred } else { PlanOutcome::Exhausted };
        }
        self.robots[i].last_plan = t1;
        for &key in ranked.iter().take(pc.max_goal_attempts) {
            let path = {
                let map = &self.robots[i].map;
                let goal = map.center_of(key);
                let region = Aabb::new(anchor.min(goal), anchor.max(goal)).expanded(pc.region_margin);
                let index = build_obstacle_index(map, &region.expanded(pc.d_min + res));
                let opts = PlanOptions { goal_radius: None, region: Some(region), max_expansions: pc.max_expansions };
                match plan_path_with(map, &index, anchor, goal, pc.d_min, &opts) {
                    Ok(p) => {
                        let p = postprocess_path(&p, &index, pc.d_min, pc.postprocess_iters, res, map);
                        Ok(shortcut_path(&p, &index, pc.d_min, res, map))
                    }
                    Err(e) => Err(e),
                }
            };
            match path {
                Ok(p) => {
                    if self.splice(i, &p) {
                        let r = &mut self.robots[i];
                        r.goal = Some(key);
                        r.stats.goals_planned += 1;
                        return PlanOutcome::Planned;
                    }
                    self.goal_failed(i, key, t1);
                }
                Err(PlanError::StartNotFree(_)) => {
                    self.robots[i].stats.plan_failures += 1;
                    return PlanOutcome::Deferred;
                }
                Err(e) => {
                    log::debug!("robot {i}: no plan to {key}: {e}");
                    self.robots[i].stats.plan_failures += 1;
                    self.goal_failed(i, key, t1);
                }
            }
        }
        PlanOutcome::Deferred
    }

    fn goal_failed(&mut self, i: usize, key: VoxelKey, t1: f64) {
        let r = &mut self.robots[i];
        let e = r.failed_goals.entry(key).or_insert((0, 0.0));
        e.0 += 1;
        e.1 = t1 + GOAL_RETRY_DELAY;
        if e.0 >= MAX_GOAL_FAILURES {
            r.failed_goals.remove(&key);
            r.excluded.insert(key);
        }
    }

    fn start_homing(&mut self, i: usize, t1: f64, estimate: f64, reason: &str) {
        let (_, anchor) = self.anchor(i);
        let ray = self.ray();
        let waypoints = match homing_path(&self.robots[i].tree, anchor, &ray) {
            Ok(route) => route.waypoints,
            Err(_) => self.retrace(i, anchor),
        };
        {
            let r = &mut self.robots[i];
            r.state.mode = Mode::Homing;
            r.goal = None;
            r.stats.homing_start = Some(t1);
            r.stats.homing_estimate = Some(estimate);
            r.stats.homing_reason = Some(reason.to_string());
        }
        let landing = *waypoints.last().unwrap();
        self.event(t1, Some(i), format!("homing ({reason}), estimate {estimate:.1} s, landing at {}", fmt_p(landing)));
        if !self.splice(i, &Path::new(waypoints)) {
            self.stop_at_anchor(i);
        }
    }

    /// Own flight path backwards, up to the first point in range of a
    /// communication node.
    fn retrace(&self, i: usize, from: Vec3) -> Vec<Vec3> {
        let r = &self.robots[i];
        let d_c = self.config.homing.d_c;
        let mut out = vec![from];
        for &p in r.breadcrumbs.iter().rev() {
            out.push(p);
            if r.tree.nearest_comm(p).1 <= d_c {
                break;
            }
        }
        out
    }

    fn participants(&self) -> Vec<(usize, Vec3)> {
        let mut v = vec![(0, self.world.base_station())];
        for (i, r) in self.robots.iter().enumerate() {
            if matches!(r.state.mode, Mode::Exploring | Mode::Homing | Mode::Landed) && r.stats.launch_time.is_some() {
                v.push((i + 1, r.state.position));
            }
        }
        v
    }

    fn replica(&self, slot: usize) -> (&HomingTree, u64) {
        if slot == 0 {
            (&self.base_tree, self.base_generation)
        } else {
            let r = &self.robots[slot - 1];
            (&r.tree, r.generation)
        }
    }

    fn store(&mut self, slot: usize, tree: HomingTree) -> u64 {
        let (old, generation) = self.replica(slot);
        if old.len() == tree.len() && old.nodes() == tree.nodes() {
            return generation;
        }
        let g = self.fresh_generation();
        if slot == 0 {
            self.base_tree = tree;
            self.base_generation = g;
        } else {
            let r = &mut self.robots[slot - 1];
            r.tree = tree;
            r.generation = g;
        }
        g
    }

    /// Pairwise tree exchange between everything within radio range,
    /// in slot order (base first, then robots by id).
    fn merge_in_range(&mut self, t1: f64) -> Result<(), FleetError> {
        let d_c = self.config.homing.d_c;
        let parts = self.participants();
        let ray = self.ray();
        for a in 0..parts.len() {
            for b in a + 1..parts.len() {
                let (sa, pa) = parts[a];
                let (sb, pb) = parts[b];
                if pa.distance(pb) > d_c {
                    continue;
                }
                let (ta, ga) = self.replica(sa);
                let (tb, gb) = self.replica(sb);
                if self.merged_at.get(&(sa, sb)) == Some(&(ga, gb)) {
                    continue;
                }
                let merged = match merge_trees(ta, tb, &ray) {
                    Ok(m) => m,
                    Err(e) => {
                        self.event(t1, None, format!("merge of slots {sa} and {sb} failed: {e}"));
                        self.merged_at.insert((sa, sb), (ga, gb));
                        continue;
                    }
                };
                let ga = self.store(sa, merged.clone());
                let gb = self.store(sb, merged);
                self.merged_at.insert((sa, sb), (ga, gb));
            }
        }
        Ok(())
    }

    /// Union of every robot's belief, log-odds summed in robot order.
    pub fn merged_map(&self) -> OccupancyMap {
        let mut m = OccupancyMap::new(self.config.map).expect("validated map params");
        for r in &self.robots {
            for (k, l) in r.map.cells() {
                let v = m.log_odds(k).unwrap_or(0.0) + l;
                m.set_log_odds(k, v);
            }
        }
        m
    }
}

fn fmt_p(p: Vec3) -> String {
    format!("({:.2}, {:.2}, {:.2})", p.x, p.y, p.z)
}
