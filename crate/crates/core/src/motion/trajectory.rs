use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::Vec3;

use super::MotionError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajSample {
    pub position: Vec3,
    /// rad
    pub heading: f64,
}

/// Reference samples at a fixed period `t_s`.
///
/// `clamped[i]` marks samples whose neighbourhood contains a corner taken at
/// the minimum speed, plus the final sample that closes the residual
/// distance; the inter-sample acceleration bound is not claimed there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajSample>,
    pub t_s: f64,
    pub clamped: Vec<bool>,
}

impl Trajectory {
    pub fn new(samples: Vec<TrajSample>, t_s: f64) -> Self {
        let n = samples.len();
        Self { samples, t_s, clamped: vec![false; n] }
    }

    pub fn hover(position: Vec3, heading: f64, t_s: f64) -> Self {
        Self::new(vec![TrajSample { position, heading }], t_s)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len().saturating_sub(1) as f64 * self.t_s
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.samples.iter().map(|s| s.position).collect()
    }

    pub fn length(&self) -> f64 {
        self.samples.windows(2).map(|w| w[0].position.distance(w[1].position)).sum()
    }

    /// Velocity of transition `i → i+1`.
    pub fn transition_velocity(&self, i: usize) -> Vec3 {
        (self.samples[i + 1].position - self.samples[i].position) / self.t_s
    }

    /// Speed of the transition arriving at sample `i` (zero at sample 0).
    pub fn speed_into(&self, i: usize) -> f64 {
        if i == 0 || i >= self.samples.len() {
            return 0.0;
        }
        self.samples[i].position.distance(self.samples[i - 1].position) / self.t_s
    }

    pub fn speeds(&self) -> Vec<f64> {
        (0..self.samples.len().saturating_sub(1)).map(|i| self.transition_velocity(i).length()).collect()
    }

    /// Vector acceleration centered on sample `i`.
    pub fn acceleration_at(&self, i: usize) -> f64 {
        (self.transition_velocity(i) - self.transition_velocity(i - 1)).length() / self.t_s
    }

    /// Linear interpolation of position at time `t`, clamped to the ends.
    pub fn position_at(&self, t: f64) -> Vec3 {
        let (i, f) = self.locate(t);
        if i + 1 >= self.samples.len() {
            return self.samples[self.samples.len() - 1].position;
        }
        self.samples[i].position.lerp(self.samples[i + 1].position, f)
    }

    /// `(index, fraction)` of time `t` between samples.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.samples.len();
        if n <= 1 || t <= 0.0 {
            return (0, 0.0);
        }
        let u = t / self.t_s;
        let i = u.floor() as usize;
        if i >= n - 1 {
            return (n - 1, 0.0);
        }
        (i, u - i as f64)
    }

    pub fn truncate(&mut self, len: usize) {
        self.samples.truncate(len);
        self.clamped.truncate(len);
    }
}

/// `t x y z heading` rows preceded by a `# t_s <value>` header.
pub fn write_trajectory(traj: &Trajectory) -> String {
    let mut s = String::new();
    writeln!(s, "# t_s {}", traj.t_s).unwrap();
    for (i, p) in traj.samples.iter().enumerate() {
        let t = i as f64 * traj.t_s;
        writeln!(s, "{} {} {} {} {}", t, p.position.x, p.position.y, p.position.z, p.heading).unwrap();
    }
    s
}

pub fn parse_trajectory(text: &str) -> Result<Trajectory, MotionError> {
    let bad = MotionError::Format;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty trajectory file".into()))?;
    let t_s: f64 = header
        .strip_prefix("# t_s ")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| bad(format!("bad header `{header}`")))?;
    let mut samples = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
        let v = v.map_err(|_| bad(format!("row {}: not numeric", n + 1)))?;
        if v.len() != 5 {
            return Err(bad(format!("row {}: expected 5 columns", n + 1)));
        }
        samples.push(TrajSample { position: Vec3::new(v[1], v[2], v[3]), heading: v[4] });
    }
    Ok(Trajectory::new(samples, t_s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn export_round_trip() {
        let t = Trajectory::new(
            (0..5).map(|i| TrajSample { position: Vec3::new(i as f64 * 0.4, 0.1, -0.3), heading: 0.25 }).collect(),
            0.2,
        );
        let back = parse_trajectory(&write_trajectory(&t)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn interpolation_clamps_to_ends() {
        let t = Trajectory::new(
            vec![
                TrajSample { position: Vec3::ZERO, heading: 0.0 },
                TrajSample { position: Vec3::X, heading: 0.0 },
            ],
            0.5,
        );
        assert_eq!(t.position_at(-1.0), Vec3::ZERO);
        assert_eq!(t.position_at(0.25), Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(t.position_at(9.0), Vec3::X);
    }
}
