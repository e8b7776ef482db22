use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::spatial::{self, Aabb};
use crate::Vec3;

use super::{GroundTruthWorld, WorldError};

/// Statistics of the random tunnel skeleton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaveParams {
    pub resolution: f64,
    /// Main tunnel plus branches; at least 2 so a junction exists.
    pub tunnel_count: usize,
    /// Nominal tunnel diameter (m).
    pub tunnel_width: f64,
    /// Relative diameter jitter per skeleton node, in [0, 1).
    pub width_jitter: f64,
    pub segment_length: f64,
    /// Segments of the main tunnel.
    pub main_segments: usize,
    /// Segments of each branch.
    pub branch_segments: usize,
    /// Degrees of yaw change per segment.
    pub max_yaw_change: f64,
    /// Degrees of pitch for ordinary segments.
    pub max_pitch: f64,
    /// Probability that a segment is a steep shaft.
    pub shaft_probability: f64,
    pub dome_count: usize,
    pub dome_radius: f64,
    pub spawn_count: usize,
}

impl Default for CaveParams {
    fn default() -> Self {
        Self {
            resolution: 0.2,
            tunnel_count: 3,
            tunnel_width: 3.0,
            width_jitter: 0.25,
            segment_length: 5.0,
            main_segments: 12,
            branch_segments: 6,
            max_yaw_change: 35.0,
            max_pitch: 8.0,
            shaft_probability: 0.08,
            dome_count: 1,
            dome_radius: 4.0,
            spawn_count: 5,
        }
    }
}

impl CaveParams {
    pub fn validate(&self) -> Result<(), WorldError> {
        let gen = |m: String| Err(WorldError::Generation(m));
        let positive = [
            ("resolution", self.resolution),
            ("tunnel_width", self.tunnel_width),
            ("segment_length", self.segment_length),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return gen(format!("{name} must be positive"));
            }
        }
        if self.tunnel_width < 2.0 * self.resolution {
            return gen(format!(
                "tunnel_width {} is below twice the resolution {}",
                self.tunnel_width, self.resolution
            ));
        }
        if self.tunnel_count < 2 {
            return gen("tunnel_count must be at least 2".into());
        }
        if self.main_segments < 2 || self.branch_segments == 0 {
            return gen("main_segments must be at least 2 and branch_segments positive".into());
        }
        if !(0.0..1.0).contains(&self.width_jitter) {
            return gen("width_jitter must lie in [0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.shaft_probability) {
            return gen("shaft_probability must lie in [0, 1]".into());
        }
        if self.dome_count > 0 && !(self.dome_radius > 0.0) {
            return gen("dome_radius must be positive".into());
        }
        if !(self.max_yaw_change >= 0.0 && self.max_pitch >= 0.0) {
            return gen("angle limits must be non-negative".into());
        }
        Ok(())
    }
}

struct Capsule {
    a: Vec3,
    b: Vec3,
    ra: f64,
    rb: f64,
}

fn direction(yaw: f64, pitch: f64) -> Vec3 {
    Vec3::new(pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), pitch.sin())
}

/// Random-walk tunnel skeleton with branches, shafts and dome chambers,
/// dilated to the tunnel width and voxelized. Branches start at interior
/// nodes of earlier tunnels (junctions); every tunnel end is a dead end.
pub fn generate_cave(seed: u64, params: &CaveParams) -> Result<GroundTruthWorld, WorldError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r0 = params.tunnel_width / 2.0;
    let radius = |rng: &mut ChaCha8Rng| {
        let j = params.width_jitter;
        r0 * if j > 0.0 { rng.gen_range(1.0 - j..=1.0 + j) } else { 1.0 }
    };
    let yaw_step = params.max_yaw_change.to_radians();
    let pitch_max = params.max_pitch.to_radians();

    // (node position, node radius, heading yaw)
    let mut tunnels: Vec<Vec<(Vec3, f64, f64)>> = Vec::new();
    let mut capsules = Vec::new();
    let mut walk = |rng: &mut ChaCha8Rng, start: Vec3, r_start: f64, yaw0: f64, segments: usize| {
        let mut nodes = vec![(start, r_start, yaw0)];
        let mut yaw = yaw0;
        for s in 0..segments {
            if s > 0 && yaw_step > 0.0 {
                yaw += rng.gen_range(-yaw_step..=yaw_step);
            }
            let shaft = rng.gen_bool(params.shaft_probability);
            let pitch = if shaft {
                let p = rng.gen_range(50f64.to_radians()..=75f64.to_radians());
                if rng.gen_bool(0.5) { p } else { -p }
            } else if pitch_max > 0.0 {
                rng.gen_range(-pitch_max..=pitch_max)
            } else {
                0.0
            };
            let len = params.segment_length * rng.gen_range(0.8..=1.2);
            let (p, r, _) = *nodes.last().unwrap();
            let q = p + direction(yaw, pitch) * len;
            let rq = radius(rng);
            capsules.push(Capsule { a: p, b: q, ra: r, rb: rq });
            nodes.push((q, rq, yaw));
        }
        nodes
    };

    let r_base = radius(&mut rng);
    let main = walk(&mut rng, Vec3::ZERO, r_base.max(r0), 0.0, params.main_segments);
    tunnels.push(main);
    for _ in 1..params.tunnel_count {
        let t = rng.gen_range(0..tunnels.len());
        let nodes = &tunnels[t];
        // interior nodes only, away from the base
        let i = rng.gen_range(1..nodes.len() - 1);
        let (p, r, yaw) = nodes[i];
        let turn = rng.gen_range(45f64.to_radians()..=100f64.to_radians());
        let yaw = if rng.gen_bool(0.5) { yaw + turn } else { yaw - turn };
        let branch = walk(&mut rng, p, r, yaw, params.branch_segments);
        tunnels.push(branch);
    }
    let mut domes = Vec::new();
    for _ in 0..params.dome_count {
        let t = rng.gen_range(0..tunnels.len());
        let nodes = &tunnels[t];
        let i = rng.gen_range(1..nodes.len());
        let r = params.dome_radius * rng.gen_range(0.8..=1.2);
        // raise the chamber so the tunnel opens into its lower part
        let c = nodes[i].0 + Vec3::new(0.0, 0.0, 0.5 * r);
        domes.push((c, r));
    }

    let res = params.resolution;
    let mut bounds = Aabb::around(Vec3::ZERO, r0);
    for c in &capsules {
        bounds = bounds.union(&Aabb::around(c.a, c.ra)).union(&Aabb::around(c.b, c.rb));
    }
    for (c, r) in &domes {
        bounds = bounds.union(&Aabb::around(*c, *r));
    }
    let mut builder = WorldBuilder::solid(res, bounds.expanded(2.0 * res))?;
    for c in &capsules {
        builder.carve_tapered_capsule(c.a, c.b, c.ra, c.rb);
    }
    for (c, r) in &domes {
        builder.carve_sphere(*c, *r);
    }

    let base = builder.world.center_of(builder.world.key_of(Vec3::ZERO));
    let dir0 = (tunnels[0][1].0 - tunnels[0][0].0).normalize();
    let mut spawns = Vec::new();
    for i in 0..params.spawn_count {
        // spaced along the first segment, clear of the base station
        let mut p = base + dir0 * (0.6 * (i + 1) as f64).min(0.5 * params.segment_length);
        p = builder.world.center_of(builder.world.key_of(p));
        if builder.world.is_occupied_at(p) {
            p = base;
        }
        spawns.push(p);
    }
    builder.world.fill_unreachable(builder.world.key_of(base));
    builder.finish(base, spawns)
}

/// Carves free space out of a solid lattice. A voxel is freed when its center
/// lies inside the carved shape.
#[derive(Debug, Clone)]
pub struct WorldBuilder {
    world: GroundTruthWorld,
}

impl WorldBuilder {
    pub fn solid(resolution: f64, bounds: Aabb) -> Result<Self, WorldError> {
        Ok(Self { world: GroundTruthWorld::solid_covering(resolution, bounds)? })
    }

    fn set_where(&mut self, region: Aabb, occupied: bool, inside: impl Fn(Vec3) -> bool) {
        let res = self.world.resolution();
        let (lo, hi) = region.key_range(res);
        for z in lo.z..=hi.z {
            for y in lo.y..=hi.y {
                for x in lo.x..=hi.x {
                    let k = crate::VoxelKey::new(x, y, z);
                    if inside(spatial::voxel_center(k, res)) {
                        self.world.set_occupied(k, occupied);
                    }
                }
            }
        }
    }

    pub fn carve_box(&mut self, min: Vec3, max: Vec3) -> &mut Self {
        let b = Aabb::new(min, max);
        self.set_where(b, false, |_| true);
        self
    }

    pub fn fill_box(&mut self, min: Vec3, max: Vec3) -> &mut Self {
        let b = Aabb::new(min, max);
        self.set_where(b, true, |_| true);
        self
    }

    pub fn carve_sphere(&mut self, center: Vec3, radius: f64) -> &mut Self {
        self.set_where(Aabb::around(center, radius), false, |p| p.distance(center) <= radius);
        self
    }

    pub fn carve_capsule(&mut self, a: Vec3, b: Vec3, radius: f64) -> &mut Self {
        self.carve_tapered_capsule(a, b, radius, radius)
    }

    /// Capsule whose radius varies linearly from `ra` at `a` to `rb` at `b`.
    pub fn carve_tapered_capsule(&mut self, a: Vec3, b: Vec3, ra: f64, rb: f64) -> &mut Self {
        let region = Aabb::around(a, ra).union(&Aabb::around(b, rb));
        let ab = b - a;
        let len2 = ab.length_squared();
        self.set_where(region, false, |p| {
            let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
            p.distance(a + ab * t) <= ra + (rb - ra) * t
        });
        self
    }

    pub fn world(&self) -> &GroundTruthWorld {
        &self.world
    }

    /// Sets the base station and spawn points and checks the world invariants.
    pub fn finish(mut self, base_station: Vec3, spawn_points: Vec<Vec3>) -> Result<GroundTruthWorld, WorldError> {
        self.world.set_base_station(base_station);
        self.world.set_spawn_points(spawn_points);
        self.world.validate()?;
        Ok(self.world)
    }

    /// Straight box corridor along +x from the origin: `length` × `width` ×
    /// `height`, centered on the x axis, enclosed by rock. The base station
    /// sits one meter in; all spawn points coincide with it.
    pub fn corridor(
        resolution: f64,
        length: f64,
        width: f64,
        height: f64,
        spawn_count: usize,
    ) -> Result<GroundTruthWorld, WorldError> {
        let hw = width / 2.0;
        let hh = height / 2.0;
        let margin = 2.0 * resolution;
        let mut b = Self::solid(
            resolution,
            Aabb::new(Vec3::new(-margin, -hw - margin, -hh - margin), Vec3::new(length + margin, hw + margin, hh + margin)),
        )?;
        b.carve_box(Vec3::new(0.0, -hw, -hh), Vec3::new(length, hw, hh));
        let base = b.world.center_of(b.world.key_of(Vec3::new(1.0, 0.0, 0.0)));
        b.finish(base, vec![base; spawn_count])
    }

    /// Closed box room of the given interior size with its corner at the
    /// origin; base station at the room center.
    pub fn box_room(resolution: f64, size: Vec3, spawn_count: usize) -> Result<GroundTruthWorld, WorldError> {
        let margin = 2.0 * resolution;
        let mut b = Self::solid(resolution, Aabb::new(Vec3::splat(-margin), size + Vec3::splat(margin)))?;
        b.carve_box(Vec3::ZERO, size);
        let base = b.world.center_of(b.world.key_of(size / 2.0));
        b.finish(base, vec![base; spawn_count])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params() -> CaveParams {
        CaveParams { resolution: 0.4, main_segments: 6, branch_segments: 3, ..CaveParams::default() }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_cave(1, &small_params()).unwrap();
        let b = generate_cave(1, &small_params()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seeds_differ() {
        let a = generate_cave(1, &small_params()).unwrap();
        let b = generate_cave(2, &small_params()).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn narrow_tunnels_are_rejected() {
        let p = CaveParams { tunnel_width: 0.3, ..CaveParams::default() };
        assert!(matches!(generate_cave(1, &p), Err(WorldError::Generation(_))));
    }

    #[test]
    fn generated_world_is_valid() {
        let w = generate_cave(5, &small_params()).unwrap();
        w.validate().unwrap();
        assert_eq!(w.spawn_points().len(), 5);
        assert!(w.free_volume() > 0.0);
    }

    #[test]
    fn corridor_and_room_helpers() {
        let c = WorldBuilder::corridor(0.5, 20.0, 4.0, 3.0, 2).unwrap();
        assert_eq!(c.spawn_points().len(), 2);
        let r = WorldBuilder::box_room(0.2, Vec3::new(4.0, 3.0, 2.0), 1).unwrap();
        assert_eq!(r.free_voxel_count(), 20 * 15 * 10);
    }
}
