use serde::{Deserialize, Serialize};

use crate::Vec3;

use super::{MotionConstraints, MotionError, Trajectory};

/// Reference generator rate (Hz).
pub const TRACKER_RATE: f64 = 100.0;
/// Extra rollout time after the trajectory ends so the state can settle.
const SETTLE_TIME: f64 = 2.0;
const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub jerk: Vec3,
    pub heading: f64,
    pub heading_rate: f64,
}

impl ReferenceState {
    pub fn at_rest(position: Vec3, heading: f64) -> Self {
        Self { position, heading, ..Self::default() }
    }

    /// Checks every magnitude against `c`.
    pub fn check(&self, c: &MotionConstraints) -> Result<(), MotionError> {
        let fin = [self.position, self.velocity, self.acceleration, self.jerk].iter().all(|v| v.is_finite())
            && self.heading.is_finite()
            && self.heading_rate.is_finite();
        if !fin {
            return Err(MotionError::Constraint("non-finite state".into()));
        }
        let over = |name: &str, v: f64, max: f64| {
            if v > max * (1.0 + SLACK) {
                Err(MotionError::Constraint(format!("{name} {v} exceeds {max}")))
            } else {
                Ok(())
            }
        };
        over("speed", self.velocity.length(), c.v_max)?;
        over("acceleration", self.acceleration.length(), c.a_max)?;
        over("jerk", self.jerk.length(), c.j_max)?;
        over("heading rate", self.heading_rate.abs(), c.heading_rate_max)
    }
}

/// Feedback gains of the reference generator.
///
/// The closed loop around a reference is `τ·j = a_ref + Kp·e_p + Kd·e_v − a`;
/// [`TrackerGains::from_bandwidth`] puts all three poles at `−ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerGains {
    pub kp: f64,
    pub kd: f64,
    pub tau: f64,
    pub heading_gain: f64,
}

impl TrackerGains {
    pub fn from_bandwidth(omega: f64) -> Self {
        Self { kp: omega * omega / 3.0, kd: omega, tau: 1.0 / (3.0 * omega), heading_gain: 4.0 }
    }
}

impl Default for TrackerGains {
    fn default() -> Self {
        Self::from_bandwidth(4.0)
    }
}

fn wrap(a: f64) -> f64 {
    let r = (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    if r <= -std::f64::consts::PI { r + std::f64::consts::TAU } else { r }
}

fn project(v: Vec3, max: f64) -> Vec3 {
    let n = v.length();
    if n > max { v * (max / n) } else { v }
}

/// Time-interpolated reference of `traj` at `t`: position linear between
/// samples, velocity interpolated from central differences, acceleration the
/// slope of that velocity. Past the end the reference hovers.
pub fn reference_at(traj: &Trajectory, t: f64) -> ReferenceState {
    let n = traj.len();
    let p = |i: usize| traj.samples[i].position;
    let node_vel = |i: usize| -> Vec3 {
        if n < 2 || i >= n - 1 {
            return Vec3::ZERO;
        }
        if i == 0 {
            return (p(1) - p(0)) / traj.t_s;
        }
        (p(i + 1) - p(i - 1)) / (2.0 * traj.t_s)
    };
    let (i, f) = traj.locate(t);
    if i + 1 >= n {
        return ReferenceState::at_rest(p(n - 1), traj.samples[n - 1].heading);
    }
    let (v0, v1) = (node_vel(i), node_vel(i + 1));
    let h0 = traj.samples[i].heading;
    let h1 = traj.samples[i + 1].heading;
    ReferenceState {
        position: p(i).lerp(p(i + 1), f),
        velocity: v0.lerp(v1, f),
        acceleration: (v1 - v0) / traj.t_s,
        jerk: Vec3::ZERO,
        heading: wrap(h0 + wrap(h1 - h0) * f),
        heading_rate: 0.0,
    }
}

/// Jerk-limited virtual model following a reference, one tick per
/// `1/TRACKER_RATE` seconds.
#[derive(Debug, Clone)]
pub struct Tracker {
    state: ReferenceState,
    gains: TrackerGains,
    constraints: MotionConstraints,
    dt: f64,
}

impl Tracker {
    /// Fails when `state` already violates `constraints`.
    pub fn new(state: ReferenceState, gains: TrackerGains, constraints: MotionConstraints) -> Result<Self, MotionError> {
        constraints.validate()?;
        state.check(&constraints)?;
        Ok(Self { state, gains, constraints, dt: 1.0 / TRACKER_RATE })
    }

    pub fn state(&self) -> &ReferenceState {
        &self.state
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Overrides the internal state (used when a pose oracle corrects it).
    pub fn reset(&mut self, state: ReferenceState) {
        self.state = state;
    }

    pub fn step(&mut self, r: &ReferenceState) -> ReferenceState {
        let c = &self.constraints;
        let g = &self.gains;
        let dt = self.dt;
        let s = self.state;
        let e_p = r.position - s.position;
        let e_v = r.velocity - s.velocity;
        let a_des = project(r.acceleration + e_p * g.kp + e_v * g.kd, c.a_max);
        let jerk = project((a_des - s.acceleration) / g.tau, c.j_max);
        // Projection onto the acceleration ball cannot lengthen the jerk.
        let acc = project(s.acceleration + jerk * dt, c.a_max);
        let jerk = (acc - s.acceleration) / dt;
        let vel = project(s.velocity + (s.acceleration + acc) * (0.5 * dt), c.v_max);
        let pos = s.position + (s.velocity + vel) * (0.5 * dt);
        let rate = (wrap(r.heading - s.heading) * g.heading_gain).clamp(-c.heading_rate_max, c.heading_rate_max);
        self.state = ReferenceState {
            position: pos,
            velocity: vel,
            acceleration: acc,
            jerk,
            heading: wrap(s.heading + rate * dt),
            heading_rate: rate,
        };
        self.state
    }
}

/// Rolls the tracker along `traj` from `state` at 100 Hz, through the end of
/// the trajectory plus a settling period. The first element is `state`.
pub fn track(
    traj: &Trajectory,
    state: ReferenceState,
    constraints: &MotionConstraints,
) -> Result<Vec<ReferenceState>, MotionError> {
    if traj.is_empty() {
        return Err(MotionError::EmptyPath);
    }
    let mut tracker = Tracker::new(state, TrackerGains::default(), *constraints)?;
    let ticks = ((traj.duration() + SETTLE_TIME) * TRACKER_RATE).ceil() as usize;
    let mut out = Vec::with_capacity(ticks + 1);
    out.push(state);
    for k in 1..=ticks {
        let r = reference_at(traj, k as f64 * tracker.dt());
        out.push(tracker.step(&r));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::TrajSample;

    #[test]
    fn hover_is_a_fixpoint() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        let traj = Trajectory::hover(p, 0.5, 0.2);
        let out = track(&traj, ReferenceState::at_rest(p, 0.5), &MotionConstraints::default()).unwrap();
        assert!(out.iter().all(|s| *s == ReferenceState::at_rest(p, 0.5)));
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let traj = Trajectory::hover(Vec3::ZERO, 0.0, 0.2);
        let s = ReferenceState { velocity: Vec3::new(5.0, 0.0, 0.0), ..ReferenceState::default() };
        assert!(matches!(track(&traj, s, &MotionConstraints::default()), Err(MotionError::Constraint(_))));
    }

    #[test]
    fn reference_interpolates_position() {
        let samples = [0.0, 0.4, 0.8]
            .iter()
            .map(|x| TrajSample { position: Vec3::new(*x, 0.0, 0.0), heading: 0.0 })
            .collect();
        let t = Trajectory::new(samples, 0.2);
        let r = reference_at(&t, 0.1);
        assert!((r.position.x - 0.2).abs() < 1e-12);
        assert!((r.velocity.x - 2.0).abs() < 1e-12);
        assert_eq!(reference_at(&t, 5.0).position.x, 0.8);
    }
}
