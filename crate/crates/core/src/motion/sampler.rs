use serde::{Deserialize, Serialize};

use crate::pathplan::Path;
use crate::Vec3;

use super::{MotionConstraints, MotionError, TrajSample, Trajectory};

/// Share of `a_max` spent on speed changes along straight stretches; the
/// rest is headroom for the tracker's feedback.
pub(crate) const TANGENTIAL_SHARE: f64 = 0.8;
/// Relative slack when comparing against constraint limits.
const TOL: f64 = 1e-9;

/// Per-segment quantities of the velocity-adaptive sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEntry {
    /// Segment length l_k.
    pub l: f64,
    /// Speed at the segment start, v_k.
    pub v: f64,
    /// Speed at the segment end, v_{k+1}.
    pub v_next: f64,
    /// Constant acceleration ā_k = |v_{k+1} - v_k| / t_acc,k.
    pub a_bar: f64,
    /// t_acc,k = 2 l_k / (v_k + v_{k+1}).
    pub t_acc: f64,
    /// Transition count N_k.
    pub n: usize,
    /// Adapted acceleration a_k = ā_k / (N_k t_s), signed like v_{k+1} - v_k.
    pub a: f64,
    /// Sampling distances d_k,i = v_k t_s + i a_k t_s², i = 1..N_k.
    pub d: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentProfile {
    pub t_s: f64,
    pub segments: Vec<SegmentEntry>,
}

/// Knobs for [`sample_trajectory_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOptions {
    /// Speed at the first sample; `None` means `v_max`.
    pub v_start: Option<f64>,
    /// Speed cap at the last sample; `None` keeps the profile's final speed.
    pub v_end: Option<f64>,
    /// Heading of the first sample; `None` faces the first chord.
    pub heading0: Option<f64>,
    /// Fail with a constraint error when some d_k,i ≤ 0 instead of placing the
    /// samples from the speed caps alone.
    pub strict: bool,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { v_start: None, v_end: None, heading0: None, strict: true }
    }
}

/// Full sampler output, intermediate stages included.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrajectory {
    pub trajectory: Trajectory,
    /// Uniform resampling T_i.
    pub initial: Trajectory,
    /// Capped speed per transition pair of `initial`.
    pub transition_velocities: Vec<f64>,
    /// Speed per path vertex (v_0 .. v_K).
    pub vertex_velocities: Vec<f64>,
    pub profile: SegmentProfile,
}

fn cumulative(points: &[Vec3]) -> Vec<f64> {
    let mut c = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    c.push(0.0);
    for w in points.windows(2) {
        acc += w[0].distance(w[1]);
        c.push(acc);
    }
    c
}

/// Walks a polyline by arc length; queries must be non-decreasing.
struct ArcCursor<'a> {
    points: &'a [Vec3],
    cum: &'a [f64],
    seg: usize,
}

impl<'a> ArcCursor<'a> {
    fn new(points: &'a [Vec3], cum: &'a [f64]) -> Self {
        Self { points, cum, seg: 0 }
    }

    fn at(&mut self, s: f64) -> Vec3 {
        let last = self.points.len() - 1;
        if s >= self.cum[last] {
            return self.points[last];
        }
        while self.seg + 1 < last && self.cum[self.seg + 1] <= s {
            self.seg += 1;
        }
        let (a, b) = (self.cum[self.seg], self.cum[self.seg + 1]);
        let f = if b > a { (s - a) / (b - a) } else { 0.0 };
        self.points[self.seg].lerp(self.points[self.seg + 1], f)
    }
}

fn wrap(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let r = (a + std::f64::consts::PI).rem_euclid(t) - std::f64::consts::PI;
    if r <= -std::f64::consts::PI { r + t } else { r }
}

fn chord_heading(a: Vec3, b: Vec3) -> Option<f64> {
    let d = b - a;
    (d.x.hypot(d.y) > 1e-9).then(|| d.y.atan2(d.x))
}

/// Rate-limited headings facing the direction of travel.
fn assign_headings(positions: &[Vec3], heading0: Option<f64>, max_step: f64) -> Vec<f64> {
    let n = positions.len();
    let mut target = Vec::with_capacity(n);
    let mut last = heading0;
    for i in 0..n {
        let h = if i + 1 < n { chord_heading(positions[i], positions[i + 1]) } else { None };
        let h = h.or(last).unwrap_or(0.0);
        target.push(h);
        last = Some(h);
    }
    let first_known = (0..n.saturating_sub(1)).find_map(|i| chord_heading(positions[i], positions[i + 1]));
    let mut out = Vec::with_capacity(n);
    let mut cur = heading0.or(first_known).unwrap_or(0.0);
    for (i, t) in target.into_iter().enumerate() {
        if i > 0 || heading0.is_some() {
            cur = wrap(cur + wrap(t - cur).clamp(-max_step, max_step));
        } else {
            cur = wrap(t);
        }
        out.push(cur);
    }
    out
}

/// Initial trajectory T_i: samples every `v_max·t_s` of arc length, the last
/// one closing the residual. A zero-length path yields a single sample.
pub fn uniform_resample(path: &Path, constraints: &MotionConstraints) -> Result<Trajectory, MotionError> {
    constraints.validate()?;
    let pts = &path.waypoints;
    if pts.is_empty() {
        return Err(MotionError::EmptyPath);
    }
    let cum = cumulative(pts);
    let positions = resample_positions(pts, &cum, constraints.spacing());
    let headings: Vec<f64> = (0..positions.len())
        .scan(None, |last: &mut Option<f64>, i| {
            let h = if i + 1 < positions.len() { chord_heading(positions[i], positions[i + 1]) } else { None };
            let h = h.or(*last);
            *last = h;
            Some(h)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|h| h.unwrap_or(0.0))
        .collect();
    let samples = positions.into_iter().zip(headings).map(|(position, heading)| TrajSample { position, heading }).collect();
    Ok(Trajectory::new(samples, constraints.t_s))
}

fn resample_positions(pts: &[Vec3], cum: &[f64], spacing: f64) -> Vec<Vec3> {
    let total = *cum.last().unwrap();
    if total == 0.0 {
        return vec![pts[0]];
    }
    let steps = (total / spacing + TOL).floor() as usize;
    let mut cursor = ArcCursor::new(pts, cum);
    let mut out: Vec<Vec3> = (0..=steps).map(|i| cursor.at((i as f64 * spacing).min(total))).collect();
    let end = *pts.last().unwrap();
    if total - steps as f64 * spacing > TOL * spacing {
        out.push(end);
    } else {
        *out.last_mut().unwrap() = end;
    }
    out
}

/// Required acceleration of transition pair `k`: ‖v(k+1) − v(k)‖ / t_s.
pub fn required_acceleration(traj: &Trajectory, k: usize) -> Result<f64, MotionError> {
    if k + 2 >= traj.len() {
        return Err(MotionError::IndexOutOfRange { index: k, len: traj.len() });
    }
    Ok((traj.transition_velocity(k + 1) - traj.transition_velocity(k)).length() / traj.t_s)
}

/// Speed cap for one required acceleration: v_max a_max / a_n when a_n
/// exceeds a_max, floored at v_min.
pub(crate) fn speed_cap(a_n: f64, c: &MotionConstraints) -> f64 {
    if a_n > c.a_max {
        (c.v_max * c.a_max / a_n).max(c.v_min)
    } else {
        c.v_max
    }
}

/// Speed cap of every transition pair of T_i.
pub fn segment_velocities(traj: &Trajectory, constraints: &MotionConstraints) -> Vec<f64> {
    (0..traj.len().saturating_sub(2))
        .map(|k| speed_cap(required_acceleration(traj, k).unwrap(), constraints))
        .collect()
}

/// Speed at each path vertex: the minimum capped speed over transition pairs
/// of T_i whose middle sample lies within one spacing of the vertex. The
/// start takes `v_start` (clamped to `[v_min, v_max]`), the end repeats the
/// last interior value.
pub fn vertex_velocities(
    path: &Path,
    initial: &Trajectory,
    transition_velocities: &[f64],
    constraints: &MotionConstraints,
    v_start: f64,
) -> Vec<f64> {
    let cum = cumulative(&path.waypoints);
    let k_segments = cum.len() - 1;
    let spacing = constraints.spacing();
    let total = *cum.last().unwrap();
    let arc = |i: usize| (i as f64 * spacing).min(total);
    let mut v = vec![constraints.v_max; k_segments + 1];
    v[0] = v_start.clamp(constraints.v_min, constraints.v_max);
    for (j, sj) in cum.iter().enumerate().take(k_segments).skip(1) {
        for (k, tv) in transition_velocities.iter().enumerate() {
            if (arc(k + 1) - sj).abs() <= spacing * (1.0 + TOL) {
                v[j] = v[j].min(*tv);
            }
        }
    }
    if k_segments >= 1 {
        v[k_segments] = v[k_segments - 1];
    }
    let _ = initial;
    v
}

fn ceil_tol(x: f64) -> usize {
    ((x - TOL).ceil().max(1.0)) as usize
}

/// Acceleration, transition count and sampling distances of each segment, from vertex speeds `v` (K+1 values) and
/// segment lengths `l` (K values).
pub fn segment_profile(v: &[f64], l: &[f64], constraints: &MotionConstraints) -> SegmentProfile {
    let t_s = constraints.t_s;
    let segments = l
        .iter()
        .enumerate()
        .map(|(k, &lk)| {
            let vk = v[k];
            let vn = v[k + 1];
            let t_acc = 2.0 * lk / (vk + vn);
            let a_bar = (vn - vk).abs() / t_acc;
            let n = if a_bar == 0.0 { ceil_tol(lk / (vk * t_s)) } else { ceil_tol(t_acc / t_s) };
            let a = if vn > vk {
                a_bar / (n as f64 * t_s)
            } else if vn < vk {
                -(a_bar / (n as f64 * t_s))
            } else {
                0.0
            };
            let d = (1..=n).map(|i| vk * t_s + i as f64 * a * t_s * t_s).collect();
            SegmentEntry { l: lk, v: vk, v_next: vn, a_bar, t_acc, n, a, d }
        })
        .collect();
    SegmentProfile { t_s, segments }
}

/// Sampling distances d_k,i of segment `k`; any non-positive distance is a
/// constraint error.
pub fn sample_distances(profile: &SegmentProfile, k: usize) -> Result<Vec<f64>, MotionError> {
    let seg = profile
        .segments
        .get(k)
        .ok_or(MotionError::IndexOutOfRange { index: k, len: profile.segments.len() })?;
    if let Some((i, d)) = seg.d.iter().enumerate().find(|(_, d)| **d <= 0.0) {
        return Err(MotionError::Constraint(format!(
            "segment {k}: d_{{k,{}}} = {d} is not positive (v_k = {}, a_k = {})",
            i + 1,
            seg.v,
            seg.a
        )));
    }
    Ok(seg.d.clone())
}

/// Path to reference trajectory with default options.
pub fn sample_trajectory(path: &Path, constraints: &MotionConstraints) -> Result<Trajectory, MotionError> {
    sample_trajectory_with(path, constraints, &SampleOptions::default()).map(|s| s.trajectory)
}

/// Uniform resampling, speed caps, vertex speeds, segment profile, then
/// sample placement.
///
/// Placement walks the path in steps of one period. Every vertex speed is a
/// cap that holds over a window of two steps either side of the vertex, so
/// the speed is constant while the samples straddle the corner. Elsewhere the
/// step length changes by at most `0.8·a_max·t_s²` per step, braking as
/// late as the caps ahead allow. Corners that still exceed `a_max` get their
/// cap lowered until they comply or reach `v_min`.
pub fn sample_trajectory_with(
    path: &Path,
    constraints: &MotionConstraints,
    options: &SampleOptions,
) -> Result<SampledTrajectory, MotionError> {
    let c = constraints;
    let initial = uniform_resample(path, c)?;
    let pts = &path.waypoints;
    let tv = segment_velocities(&initial, c);
    let v_start = options.v_start.unwrap_or(c.v_max);
    let vv = vertex_velocities(path, &initial, &tv, c, v_start);
    let lengths = path.segment_lengths();
    let profile = segment_profile(&vv, &lengths, c);
    if options.strict {
        for k in 0..profile.segments.len() {
            sample_distances(&profile, k)?;
        }
    }
    let trajectory = if initial.len() == 1 {
        Trajectory::hover(pts[0], options.heading0.unwrap_or(initial.samples[0].heading), c.t_s)
    } else {
        let v_end = options.v_end.unwrap_or(*vv.last().unwrap());
        let caps: Vec<f64> = vv[1..vv.len() - 1].to_vec();
        place_with_repair(pts, &caps, v_start, v_end, options.heading0, c)
    };
    Ok(SampledTrajectory { trajectory, initial, transition_velocities: tv, vertex_velocities: vv, profile })
}

#[derive(Debug, Clone, Copy)]
struct Window {
    a: f64,
    b: f64,
    cap: f64,
}

fn braking_distance(d: f64, target: f64, delta: f64) -> f64 {
    if d <= target {
        return 0.0;
    }
    let m = ((d - target) / delta - 1e-12).ceil().max(1.0);
    (m - 1.0) * d - delta * (m - 1.0) * m / 2.0
}

struct Placement {
    positions: Vec<Vec3>,
    arc: Vec<f64>,
}

/// `caps[j]` is the speed cap of interior vertex `j + 1`.
fn place(pts: &[Vec3], cum: &[f64], caps: &[f64], v_start: f64, v_end: f64, c: &MotionConstraints) -> Placement {
    let t_s = c.t_s;
    let total = *cum.last().unwrap();
    let d_max = c.v_max * t_s;
    let delta = TANGENTIAL_SHARE * c.a_max * t_s * t_s;
    let d_floor = 0.5 * c.v_min * t_s;

    let mut raw: Vec<Window> = caps
        .iter()
        .enumerate()
        .map(|(j, cap)| {
            let s = cum[j + 1];
            let w = 2.0 * cap * t_s * (1.0 + 1e-6);
            Window { a: s - w, b: s + w, cap: *cap }
        })
        .collect();
    if v_end < c.v_max {
        let ve = v_end.max(c.v_min);
        raw.push(Window { a: total - 2.0 * ve * t_s, b: f64::INFINITY, cap: ve });
    }
    raw.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut windows: Vec<Window> = Vec::new();
    for w in raw {
        match windows.last_mut() {
            Some(last) if w.a <= last.b => {
                last.b = last.b.max(w.b);
                last.cap = last.cap.min(w.cap);
            }
            _ => windows.push(w),
        }
    }

    let mut cursor = ArcCursor::new(pts, cum);
    let mut positions = vec![pts[0]];
    let mut arc = vec![0.0];
    let mut s = 0.0;
    let mut d_prev = (v_start.max(0.0) * t_s).min(d_max);
    let mut first_ahead = 0usize;
    let feasible = |s: f64, d: f64, from: usize| {
        windows[from..].iter().filter(|w| w.a > s).all(|w| {
            let target = w.cap * t_s;
            d <= target + 1e-12 || s + d + braking_distance(d, target, delta) <= w.a + 1e-12
        })
    };
    let max_steps = (total / d_floor).ceil() as usize + 16;
    for _ in 0..max_steps {
        while first_ahead < windows.len() && windows[first_ahead].b <= s {
            first_ahead += 1;
        }
        let inside = windows[first_ahead..].iter().find(|w| w.a <= s && s < w.b).copied();
        let d = if let Some(w) = inside {
            let cap = w.cap * t_s;
            let hold = if d_prev > cap { (d_prev - delta).max(cap) } else if d_prev < d_floor { (d_prev + delta).min(cap) } else { d_prev };
            if feasible(s, hold, first_ahead) { hold } else { (hold - delta).max(d_floor) }
        } else {
            let up = (d_prev + delta).min(d_max);
            let down = (d_prev - delta).max(d_floor);
            // Slowing exactly to an upcoming cap beats undershooting it.
            let mut targets: Vec<f64> = windows[first_ahead..]
                .iter()
                .map(|w| w.cap * t_s)
                .filter(|t| *t < d_prev && *t > down)
                .collect();
            targets.sort_by(|a, b| b.total_cmp(a));
            [up, d_prev.clamp(d_floor, d_max)]
                .into_iter()
                .chain(targets)
                .chain([down])
                .find(|d| feasible(s, *d, first_ahead))
                .unwrap_or(down)
        };
        let d = d.max(d_floor).min(d_max);
        s += d;
        if s >= total - TOL * d_max {
            positions.push(*pts.last().unwrap());
            arc.push(total);
            break;
        }
        positions.push(cursor.at(s));
        arc.push(s);
        d_prev = d;
    }
    Placement { positions, arc }
}

fn place_with_repair(
    pts: &[Vec3],
    caps: &[f64],
    v_start: f64,
    v_end: f64,
    heading0: Option<f64>,
    c: &MotionConstraints,
) -> Trajectory {
    let cum_owned = cumulative(pts);
    let cum: &[f64] = &cum_owned;
    let mut caps = caps.to_vec();
    let at_floor = |v: f64| v <= c.v_min * (1.0 + TOL);
    let vertices_in = |lo: f64, hi: f64| {
        let eps = TOL * (1.0 + hi.abs());
        (1..cum.len() - 1).filter(move |j| cum[*j] >= lo - eps && cum[*j] <= hi + eps)
    };
    let mut placement = place(pts, cum, &caps, v_start, v_end, c);
    for _ in 0..60 {
        let p = &placement.positions;
        let n = p.len();
        let mut changed = false;
        for i in 1..n.saturating_sub(2) {
            let u1 = p[i] - p[i - 1];
            let u2 = p[i + 1] - p[i];
            let acc = (u2 - u1).length() / (c.t_s * c.t_s);
            if acc <= c.a_max * (1.0 + 1e-4) {
                continue;
            }
            for j in vertices_in(placement.arc[i - 1], placement.arc[i + 1]) {
                if !at_floor(caps[j - 1]) {
                    caps[j - 1] = (caps[j - 1] * 0.85).max(c.v_min);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        placement = place(pts, cum, &caps, v_start, v_end, c);
    }
    let p = placement.positions;
    let n = p.len();
    let mut clamped = vec![false; n];
    for i in 1..n.saturating_sub(1) {
        clamped[i] = vertices_in(placement.arc[i - 1], placement.arc[i + 1]).any(|j| at_floor(caps[j - 1]));
    }
    if n >= 3 {
        clamped[n - 2] = true;
    }
    if n >= 2 {
        clamped[n - 1] = true;
    }
    let headings = assign_headings(&p, heading0, c.heading_rate_max * c.t_s);
    let samples = p.into_iter().zip(headings).map(|(position, heading)| TrajSample { position, heading }).collect();
    Trajectory { samples, t_s: c.t_s, clamped }
}
