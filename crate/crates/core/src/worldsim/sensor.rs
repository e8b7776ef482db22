use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::Vec3;

use super::{GroundTruthWorld, WorldError};

/// Lowest intensity a true surface return can carry.
pub const SURFACE_INTENSITY_MIN: f64 = 0.05;
/// Upper bound (inclusive) of the dust intensity band.
pub const DUST_INTENSITY_MAX: f64 = 0.04;

/// Rotating multi-beam range sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    pub horizontal_rays: usize,
    pub vertical_rays: usize,
    /// Degrees.
    pub vfov: f64,
    pub max_range: f64,
    /// Hz.
    pub scan_rate: f64,
    pub noise_sigma: f64,
    /// Expected false returns per scan.
    pub dust_rate: f64,
    pub dust_range_max: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            horizontal_rays: 180,
            vertical_rays: 16,
            vfov: 45.0,
            max_range: 50.0,
            scan_rate: 10.0,
            noise_sigma: 0.0,
            dust_rate: 0.0,
            dust_range_max: 2.5,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: &str| Err(WorldError::Sensor(m.to_string()));
        if self.horizontal_rays == 0 || self.vertical_rays == 0 {
            return bad("ray counts must be positive");
        }
        if !(self.vfov > 0.0 && self.vfov <= 180.0) {
            return bad("vfov must lie in (0, 180] degrees");
        }
        if !(self.scan_rate > 0.0 && self.scan_rate.is_finite()) {
            return bad("scan_rate must be positive");
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return bad("max_range must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative");
        }
        if !(self.dust_rate >= 0.0 && self.dust_rate.is_finite()) {
            return bad("dust_rate must be non-negative");
        }
        if !(self.dust_range_max > 0.0 && self.dust_range_max.is_finite()) {
            return bad("dust_range_max must be positive");
        }
        Ok(())
    }

    pub fn ray_count(&self) -> usize {
        self.horizontal_rays * self.vertical_rays
    }

    /// Beam elevations in radians, linearly spaced across the vertical field
    /// of view (a single beam is horizontal).
    pub fn elevations(&self) -> Vec<f64> {
        let half = self.vfov.to_radians() / 2.0;
        if self.vertical_rays == 1 {
            return vec![0.0];
        }
        let n = self.vertical_rays - 1;
        (0..self.vertical_rays)
            .map(|j| -half + 2.0 * half * j as f64 / n as f64)
            .collect()
    }

    /// Unit ray directions for a sensor yawed by `heading`, elevation-major.
    pub fn ray_directions(&self, heading: f64) -> Vec<Vec3> {
        let elev = self.elevations();
        let mut out = Vec::with_capacity(self.ray_count());
        for e in elev {
            let (se, ce) = e.sin_cos();
            for i in 0..self.horizontal_rays {
                let az = heading + std::f64::consts::TAU * i as f64 / self.horizontal_rays as f64;
                let (sa, ca) = az.sin_cos();
                out.push(Vec3::new(ce * ca, ce * sa, se));
            }
        }
        out
    }

    pub fn intensity_at(&self, range: f64) -> f64 {
        (1.0 - range / self.max_range).clamp(SURFACE_INTENSITY_MIN, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    /// Yaw in radians.
    pub heading: f64,
}

impl Pose {
    pub fn new(position: Vec3, heading: f64) -> Self {
        Self { position, heading }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Return {
    pub direction: Vec3,
    pub range: f64,
    pub intensity: f64,
}

impl Return {
    pub fn endpoint(&self, origin: Vec3) -> Vec3 {
        origin + self.direction * self.range
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub origin: Pose,
    pub returns: Vec<Return>,
    /// Directions of rays that produced no return within `max_range`.
    pub misses: Vec<Vec3>,
    pub max_range: f64,
    pub timestamp: f64,
}

impl Scan {
    pub fn empty(origin: Pose, max_range: f64) -> Self {
        Self { origin, returns: Vec::new(), misses: Vec::new(), max_range, timestamp: 0.0 }
    }
}

/// Casts every beam of `model` against the world.
///
/// Range noise draws from ChaCha8 stream 0 of `rng_seed`, in ray order. Dust
/// uses stream 1: first the Poisson count, then per particle azimuth,
/// elevation, range and intensity.
pub fn simulate_scan(
    world: &GroundTruthWorld,
    pose: Pose,
    model: &SensorModel,
    rng_seed: u64,
) -> Result<Scan, WorldError> {
    model.validate()?;
    if !world.extents().contains(pose.position) || !pose.position.is_finite() {
        return Err(WorldError::OutOfExtents(pose.position));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let noise = (model.noise_sigma > 0.0).then(|| Normal::new(0.0, model.noise_sigma).unwrap());
    let mut scan = Scan::empty(pose, model.max_range);
    let origin = pose.position;
    for dir in model.ray_directions(pose.heading) {
        match world.cast_ray(origin, dir, model.max_range) {
            Some(t) => {
                let mut r = t;
                if let Some(n) = &noise {
                    r = (t + n.sample(&mut rng)).clamp(1e-3, model.max_range);
                }
                scan.returns.push(Return { direction: dir, range: r, intensity: model.intensity_at(r) });
            }
            None => scan.misses.push(dir),
        }
    }
    if model.dust_rate > 0.0 {
        let mut drng = ChaCha8Rng::seed_from_u64(rng_seed);
        drng.set_stream(1);
        let count = Poisson::new(model.dust_rate).unwrap().sample(&mut drng) as usize;
        let half = model.vfov.to_radians() / 2.0;
        let rmax = model.dust_range_max.min(model.max_range);
        for _ in 0..count {
            let az = drng.gen_range(0.0..std::f64::consts::TAU);
            let el = if half > 0.0 { drng.gen_range(-half..=half) } else { 0.0 };
            let (se, ce) = f64::sin_cos(el);
            let (sa, ca) = f64::sin_cos(az);
            let direction = Vec3::new(ce * ca, ce * sa, se);
            let range = rmax * (1.0 - drng.gen::<f64>());
            let intensity = drng.gen_range(0.0..=DUST_INTENSITY_MAX);
            scan.returns.push(Return { direction, range, intensity });
        }
    }
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::Aabb;
    use crate::worldsim::WorldBuilder;

    fn room() -> GroundTruthWorld {
        // 10 m of free space in x, wall face at x = 6.0
        let mut b = WorldBuilder::solid(0.2, Aabb::new(Vec3::new(-5.0, -3.0, -3.0), Vec3::new(7.0, 3.0, 3.0))).unwrap();
        b.carve_box(Vec3::new(-4.0, -2.0, -2.0), Vec3::new(5.99, 2.0, 2.0));
        b.finish(Vec3::new(1.0, 0.1, 0.1), vec![]).unwrap()
    }

    fn line_model() -> SensorModel {
        SensorModel { horizontal_rays: 8, vertical_rays: 1, ..SensorModel::default() }
    }

    #[test]
    fn forward_ray_measures_wall_distance() {
        let w = room();
        let s = simulate_scan(&w, Pose::new(Vec3::new(1.0, 0.1, 0.1), 0.0), &line_model(), 3).unwrap();
        let fwd = s.returns.iter().find(|r| r.direction.x > 0.999).unwrap();
        assert!((fwd.range - 5.0).abs() < 1e-9, "{}", fwd.range);
        assert!((fwd.intensity - 0.9).abs() < 1e-9);
    }

    #[test]
    fn outside_pose_is_rejected() {
        let w = room();
        let r = simulate_scan(&w, Pose::new(Vec3::new(100.0, 0.0, 0.0), 0.0), &line_model(), 3);
        assert!(matches!(r, Err(WorldError::OutOfExtents(_))));
    }

    #[test]
    fn every_ray_accounted_for() {
        let w = room();
        let m = SensorModel { horizontal_rays: 36, vertical_rays: 5, max_range: 4.0, ..SensorModel::default() };
        let s = simulate_scan(&w, Pose::new(Vec3::new(1.0, 0.1, 0.1), 0.3), &m, 3).unwrap();
        assert_eq!(s.returns.len() + s.misses.len(), 180);
        assert!(s.returns.iter().all(|r| r.range > 0.0 && r.range <= 4.0));
    }

    #[test]
    fn invalid_models_are_rejected() {
        for m in [
            SensorModel { vfov: 0.0, ..SensorModel::default() },
            SensorModel { vfov: 181.0, ..SensorModel::default() },
            SensorModel { scan_rate: 0.0, ..SensorModel::default() },
            SensorModel { dust_rate: -1.0, ..SensorModel::default() },
        ] {
            assert!(m.validate().is_err());
        }
    }
}
