use crate::pathplan::Path;

use super::sampler::{sample_trajectory_with, SampleOptions, TANGENTIAL_SHARE};
use super::{MotionConstraints, MotionError, Trajectory};

/// Splices `new_path` onto `current` without stopping.
///
/// The junction is the first sample at or after `progress` within one sample
/// distance of the new path's start. The splice point is pulled back from the
/// junction far enough to slow to `v_min` if the continuation needs it; from
/// there the remaining old samples up to the junction and the new path are
/// resampled as one polyline, entering at the current speed and heading.
///
/// Returns `current` unchanged when `new_path` equals its remaining samples.
pub fn append_trajectory(
    current: &Trajectory,
    progress: usize,
    new_path: &Path,
    constraints: &MotionConstraints,
) -> Result<Trajectory, MotionError> {
    constraints.validate()?;
    if new_path.is_empty() {
        return Err(MotionError::EmptyPath);
    }
    if progress >= current.len() {
        return Err(MotionError::IndexOutOfRange { index: progress, len: current.len() });
    }
    let start = new_path.waypoints[0];
    let reach = constraints.spacing() * (1.0 + 1e-9);
    let j = (progress..current.len())
        .find(|&i| current.samples[i].position.distance(start) <= reach)
        .ok_or_else(|| MotionError::Append(format!("new path start {start} is not near the remaining trajectory")))?;

    if current.samples[j..].iter().map(|s| s.position).eq(new_path.waypoints.iter().copied()) {
        return Ok(current.clone());
    }

    let speed_at = |i: usize| {
        if i > 0 {
            current.speed_into(i)
        } else if current.len() > 1 {
            current.transition_velocity(0).length()
        } else {
            0.0
        }
    };
    let dv = TANGENTIAL_SHARE * constraints.a_max * constraints.t_s;
    let steps = ((speed_at(j) - constraints.v_min).max(0.0) / dv).ceil() as usize;
    let m = j.saturating_sub(steps).max(progress);

    let mut pts: Vec<_> = current.samples[m..=j].iter().map(|s| s.position).collect();
    pts.extend(new_path.waypoints.iter().copied());
    let splice = Path::new(pts);
    let opts = SampleOptions {
        v_start: Some(speed_at(m).clamp(constraints.v_min, constraints.v_max)),
        v_end: Some(constraints.v_min),
        heading0: Some(current.samples[m].heading),
        strict: false,
    };
    let placed = sample_trajectory_with(&splice, constraints, &opts)?.trajectory;

    let mut out = current.clone();
    out.truncate(m + 1);
    out.samples.extend_from_slice(&placed.samples[1..]);
    out.clamped.extend_from_slice(&placed.clamped[1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::sample_trajectory;
    use crate::Vec3;

    fn c() -> MotionConstraints {
        MotionConstraints::default()
    }

    #[test]
    fn identical_remainder_is_identity() {
        let cur = sample_trajectory(&Path::new(vec![Vec3::ZERO, Vec3::new(8.0, 0.0, 0.0)]), &c()).unwrap();
        let rest = Path::new(cur.positions()[5..].to_vec());
        assert_eq!(append_trajectory(&cur, 5, &rest, &c()).unwrap(), cur);
    }

    #[test]
    fn far_start_is_an_append_error() {
        let cur = sample_trajectory(&Path::new(vec![Vec3::ZERO, Vec3::new(8.0, 0.0, 0.0)]), &c()).unwrap();
        let p = Path::new(vec![Vec3::new(4.0, 5.0, 0.0), Vec3::new(4.0, 9.0, 0.0)]);
        assert!(matches!(append_trajectory(&cur, 0, &p, &c()), Err(MotionError::Append(_))));
    }

    #[test]
    fn prefix_before_splice_is_kept() {
        let cur = sample_trajectory(&Path::new(vec![Vec3::ZERO, Vec3::new(8.0, 0.0, 0.0)]), &c()).unwrap();
        let p = Path::new(vec![cur.samples[12].position, Vec3::new(4.8, 4.0, 0.0)]);
        let out = append_trajectory(&cur, 3, &p, &c()).unwrap();
        assert_eq!(out.samples[..4], cur.samples[..4]);
        assert_eq!(out.samples.last().unwrap().position, Vec3::new(4.8, 4.0, 0.0));
    }
}
