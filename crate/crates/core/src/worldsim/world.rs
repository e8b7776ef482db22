use std::sync::OnceLock;

use crate::spatial::{self, Aabb};
use crate::{Vec3, VoxelKey};

use super::WorldError;

/// Dense ground-truth voxel world.
///
/// The lattice is aligned with the global voxel grid (`floor(p / res)`), so
/// belief maps built at the same resolution share voxel keys with it. Space
/// outside the lattice counts as occupied for every query.
#[derive(Debug, Clone)]
pub struct GroundTruthWorld {
    resolution: f64,
    min_key: VoxelKey,
    dims: [usize; 3],
    occupied: Vec<u64>,
    base_station: Vec3,
    spawn_points: Vec<Vec3>,
    distance_field: OnceLock<Vec<f32>>,
}

impl PartialEq for GroundTruthWorld {
    fn eq(&self, other: &Self) -> bool {
        self.resolution.to_bits() == other.resolution.to_bits()
            && self.min_key == other.min_key
            && self.dims == other.dims
            && self.occupied == other.occupied
            && self.base_station == other.base_station
            && self.spawn_points == other.spawn_points
    }
}

impl GroundTruthWorld {
    /// A lattice of `dims` voxels starting at `min_key`, every voxel occupied.
    pub fn solid(resolution: f64, min_key: VoxelKey, dims: [usize; 3]) -> Result<Self, WorldError> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(WorldError::Invalid { field: "resolution", reason: "must be positive".into() });
        }
        let n = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .filter(|n| *n > 0)
            .ok_or(WorldError::Invalid { field: "dims", reason: "lattice must be non-empty".into() })?;
        let words = n.div_ceil(64);
        let mut occupied = vec![u64::MAX; words];
        let tail = n % 64;
        if tail != 0 {
            occupied[words - 1] = (1u64 << tail) - 1;
        }
        Ok(Self {
            resolution,
            min_key,
            dims,
            occupied,
            base_station: Vec3::ZERO,
            spawn_points: Vec::new(),
            distance_field: OnceLock::new(),
        })
    }

    /// The smallest solid lattice whose voxel centers cover `bounds`.
    pub fn solid_covering(resolution: f64, bounds: Aabb) -> Result<Self, WorldError> {
        let lo = spatial::voxel_key(bounds.min, resolution);
        let hi = spatial::voxel_key(bounds.max, resolution);
        let dims = [
            (hi.x - lo.x + 1) as usize,
            (hi.y - lo.y + 1) as usize,
            (hi.z - lo.z + 1) as usize,
        ];
        Self::solid(resolution, lo, dims)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn min_key(&self) -> VoxelKey {
        self.min_key
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn base_station(&self) -> Vec3 {
        self.base_station
    }

    pub fn spawn_points(&self) -> &[Vec3] {
        &self.spawn_points
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub(crate) fn raw_bits(&self) -> &[u64] {
        &self.occupied
    }

    pub fn extents(&self) -> Aabb {
        let r = self.resolution;
        let min = Vec3::new(self.min_key.x as f64, self.min_key.y as f64, self.min_key.z as f64) * r;
        let size = Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * r;
        Aabb::new(min, min + size)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.index_of(spatial::voxel_key(p, self.resolution)).is_some()
    }

    pub fn key_of(&self, p: Vec3) -> VoxelKey {
        spatial::voxel_key(p, self.resolution)
    }

    pub fn center_of(&self, key: VoxelKey) -> Vec3 {
        spatial::voxel_center(key, self.resolution)
    }

    #[inline]
    pub fn index_of(&self, key: VoxelKey) -> Option<usize> {
        let l = key - self.min_key;
        if l.x < 0 || l.y < 0 || l.z < 0 {
            return None;
        }
        let (x, y, z) = (l.x as usize, l.y as usize, l.z as usize);
        if x >= self.dims[0] || y >= self.dims[1] || z >= self.dims[2] {
            return None;
        }
        Some(x + self.dims[0] * (y + self.dims[1] * z))
    }

    pub fn key_at_index(&self, idx: usize) -> VoxelKey {
        let x = idx % self.dims[0];
        let y = (idx / self.dims[0]) % self.dims[1];
        let z = idx / (self.dims[0] * self.dims[1]);
        self.min_key + VoxelKey::new(x as i32, y as i32, z as i32)
    }

    #[inline]
    fn bit(&self, idx: usize) -> bool {
        self.occupied[idx / 64] >> (idx % 64) & 1 == 1
    }

    /// Occupancy of a voxel; voxels outside the lattice are occupied.
    #[inline]
    pub fn is_occupied(&self, key: VoxelKey) -> bool {
        self.index_of(key).is_none_or(|i| self.bit(i))
    }

    pub fn is_occupied_at(&self, p: Vec3) -> bool {
        self.is_occupied(self.key_of(p))
    }

    /// Sets a lattice voxel; keys outside the lattice are ignored.
    pub fn set_occupied(&mut self, key: VoxelKey, occupied: bool) {
        if let Some(i) = self.index_of(key) {
            if occupied {
                self.occupied[i / 64] |= 1 << (i % 64);
            } else {
                self.occupied[i / 64] &= !(1 << (i % 64));
            }
            self.distance_field = OnceLock::new();
        }
    }

    pub(crate) fn set_bits(&mut self, bits: Vec<u64>) {
        self.occupied = bits;
        self.distance_field = OnceLock::new();
    }

    pub fn set_base_station(&mut self, p: Vec3) {
        self.base_station = p;
    }

    pub fn set_spawn_points(&mut self, pts: Vec<Vec3>) {
        self.spawn_points = pts;
    }

    pub fn free_voxel_count(&self) -> usize {
        self.voxel_count() - self.occupied.iter().map(|w| w.count_ones() as usize).sum::<usize>()
    }

    pub fn free_volume(&self) -> f64 {
        self.free_voxel_count() as f64 * self.resolution.powi(3)
    }

    pub fn occupied_keys(&self) -> impl Iterator<Item = VoxelKey> + '_ {
        (0..self.voxel_count()).filter(|&i| self.bit(i)).map(|i| self.key_at_index(i))
    }

    pub fn free_keys(&self) -> impl Iterator<Item = VoxelKey> + '_ {
        (0..self.voxel_count()).filter(|&i| !self.bit(i)).map(|i| self.key_at_index(i))
    }

    /// Occupied lattice voxels with at least one free face neighbour.
    pub fn surface_keys(&self) -> Vec<VoxelKey> {
        self.occupied_keys()
            .filter(|&k| spatial::FACE_NEIGHBORS.iter().any(|&o| !self.is_occupied(k + o)))
            .collect()
    }

    /// Checks the structural invariants: spawn points and base station in free
    /// voxels, at least one free voxel, and every free voxel 26-connected to
    /// the base station.
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.free_voxel_count() == 0 {
            return Err(WorldError::Invalid { field: "occupancy", reason: "no free voxel".into() });
        }
        if self.is_occupied_at(self.base_station) {
            return Err(WorldError::Invalid {
                field: "base_station",
                reason: format!("{:?} is not in a free voxel", self.base_station),
            });
        }
        for p in &self.spawn_points {
            if self.is_occupied_at(*p) {
                return Err(WorldError::Invalid {
                    field: "spawn_points",
                    reason: format!("{p:?} is not in a free voxel"),
                });
            }
        }
        let reached = self.flood_free(self.key_of(self.base_station));
        if reached != self.free_voxel_count() {
            return Err(WorldError::Disconnected {
                reachable: reached,
                free: self.free_voxel_count(),
            });
        }
        Ok(())
    }

    /// Number of free voxels 26-reachable from `start`.
    pub fn flood_free(&self, start: VoxelKey) -> usize {
        self.flood_mask(start).iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Bitset (lattice order) of the free voxels 26-reachable from `start`.
    pub(crate) fn flood_mask(&self, start: VoxelKey) -> Vec<u64> {
        let mut seen = vec![0u64; self.occupied.len()];
        let Some(s) = self.index_of(start) else { return seen };
        if self.bit(s) {
            return seen;
        }
        let mut stack = vec![s];
        seen[s / 64] |= 1 << (s % 64);
        let offsets: Vec<VoxelKey> = spatial::neighbors26().collect();
        while let Some(i) = stack.pop() {
            let k = self.key_at_index(i);
            for o in &offsets {
                if let Some(j) = self.index_of(k + *o) {
                    if !self.bit(j) && seen[j / 64] >> (j % 64) & 1 == 0 {
                        seen[j / 64] |= 1 << (j % 64);
                        stack.push(j);
                    }
                }
            }
        }
        seen
    }

    /// Fills every free voxel not 26-reachable from `start`.
    pub(crate) fn fill_unreachable(&mut self, start: VoxelKey) {
        let mask = self.flood_mask(start);
        let n = self.voxel_count();
        for (w, (occ, m)) in self.occupied.iter_mut().zip(&mask).enumerate() {
            let valid = if (w + 1) * 64 <= n { u64::MAX } else { (1u64 << (n % 64)) - 1 };
            *occ = (*occ | !*m) & valid;
        }
        self.distance_field = OnceLock::new();
    }

    /// First-hit distance along a unit ray, `None` if nothing is hit within
    /// `max_range` or the origin voxel is itself occupied.
    pub fn cast_ray(&self, origin: Vec3, dir: Vec3, max_range: f64) -> Option<f64> {
        let mut hit = None;
        traverse(self, origin, dir, max_range, |key, t| {
            if self.is_occupied(key) {
                if t > 0.0 && t <= max_range {
                    hit = Some(t);
                }
                return false;
            }
            true
        });
        hit
    }

    /// Euclidean distance transform: for every lattice voxel, the distance
    /// from its center to the nearest occupied voxel center (out-of-lattice
    /// voxels included). Built once on first use.
    fn distance_field(&self) -> &[f32] {
        self.distance_field.get_or_init(|| edt(self))
    }

    /// Local passage widths: twice the obstacle distance at free voxels whose
    /// distance is a maximum over their 26 neighbours (a discrete medial axis).
    pub fn corridor_widths(&self) -> Vec<f64> {
        let df = self.distance_field();
        let mut out = Vec::new();
        for idx in 0..df.len() {
            if self.bit(idx) {
                continue;
            }
            let k = self.key_at_index(idx);
            let d = df[idx];
            let ridge = (-1..=1).all(|dz| {
                (-1..=1).all(|dy| {
                    (-1..=1).all(|dx| match self.index_of(k + VoxelKey::new(dx, dy, dz)) {
                        Some(j) => df[j] <= d,
                        None => true,
                    })
                })
            });
            if ridge {
                out.push(2.0 * d as f64);
            }
        }
        out
    }

    /// True iff `p` is not inside an occupied voxel and every occupied voxel
    /// center is at least `clearance` away.
    pub fn is_clear(&self, p: Vec3, clearance: f64) -> bool {
        let key = self.key_of(p);
        let Some(idx) = self.index_of(key) else { return false };
        if self.bit(idx) {
            return false;
        }
        if clearance <= 0.0 {
            return true;
        }
        let offset = p.distance(self.center_of(key));
        let d = self.distance_field()[idx] as f64;
        let eps = 1e-5 * self.resolution;
        if d - offset >= clearance + eps {
            return true;
        }
        if d + offset < clearance - eps {
            return false;
        }
        self.exact_min_distance(p, clearance) >= clearance
    }

    /// Distance from `p` to the nearest occupied voxel center, searched up to
    /// `cap` (returns some value ≥ `cap` if nothing is closer).
    pub fn exact_min_distance(&self, p: Vec3, cap: f64) -> f64 {
        let r = (cap / self.resolution).ceil() as i32 + 1;
        let c = self.key_of(p);
        let mut best = f64::INFINITY;
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    let k = c + VoxelKey::new(dx, dy, dz);
                    if self.is_occupied(k) {
                        best = best.min(p.distance(self.center_of(k)));
                    }
                }
            }
        }
        best
    }

    /// Samples the segment at half-voxel spacing and requires every sample to
    /// satisfy [`is_clear`](Self::is_clear). Symmetric in `a` and `b`.
    pub fn collision_free_segment(&self, a: Vec3, b: Vec3, clearance: f64) -> bool {
        let (a, b) = if a.to_array() <= b.to_array() { (a, b) } else { (b, a) };
        let len = a.distance(b);
        let n = (len / (0.5 * self.resolution)).ceil() as usize;
        (0..=n).all(|i| {
            let t = if n == 0 { 0.0 } else { i as f64 / n as f64 };
            self.is_clear(a.lerp(b, t), clearance)
        })
    }
}

fn traverse(world: &GroundTruthWorld, origin: Vec3, dir: Vec3, max_t: f64, visit: impl FnMut(VoxelKey, f64) -> bool) {
    spatial::traverse_voxels(origin, dir, max_t, world.resolution, visit);
}

/// Exact squared EDT (lower envelope of parabolas) over the lattice padded
/// by one occupied layer on every side.
fn edt(world: &GroundTruthWorld) -> Vec<f32> {
    let [nx, ny, nz] = world.dims;
    let (px, py, pz) = (nx + 2, ny + 2, nz + 2);
    let inf = 1e20f64;
    let mut f = vec![inf; px * py * pz];
    let id = |x: usize, y: usize, z: usize| x + px * (y + py * z);
    for z in 0..pz {
        for y in 0..py {
            for x in 0..px {
                let inside = (1..=nx).contains(&x) && (1..=ny).contains(&y) && (1..=nz).contains(&z);
                let occ = !inside || world.bit((x - 1) + nx * ((y - 1) + ny * (z - 1)));
                if occ {
                    f[id(x, y, z)] = 0.0;
                }
            }
        }
    }
    let maxn = px.max(py).max(pz);
    let mut line = vec![0.0; maxn];
    let mut out = vec![0.0; maxn];
    let mut v = vec![0usize; maxn];
    let mut zb = vec![0.0; maxn + 1];
    // x pass
    for z in 0..pz {
        for y in 0..py {
            for x in 0..px {
                line[x] = f[id(x, y, z)];
            }
            dt1d(&line[..px], &mut out[..px], &mut v, &mut zb);
            for x in 0..px {
                f[id(x, y, z)] = out[x];
            }
        }
    }
    for z in 0..pz {
        for x in 0..px {
            for y in 0..py {
                line[y] = f[id(x, y, z)];
            }
            dt1d(&line[..py], &mut out[..py], &mut v, &mut zb);
            for y in 0..py {
                f[id(x, y, z)] = out[y];
            }
        }
    }
    for y in 0..py {
        for x in 0..px {
            for z in 0..pz {
                line[z] = f[id(x, y, z)];
            }
            dt1d(&line[..pz], &mut out[..pz], &mut v, &mut zb);
            for z in 0..pz {
                f[id(x, y, z)] = out[z];
            }
        }
    }
    let r = world.resolution;
    let mut d = vec![0f32; nx * ny * nz];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                d[x + nx * (y + ny * z)] = (f[id(x + 1, y + 1, z + 1)].sqrt() * r) as f32;
            }
        }
    }
    d
}

fn dt1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let inf = f64::INFINITY;
    let finite = |q: usize| f[q] < 1e19;
    let Some(first) = (0..n).find(|&q| finite(q)) else {
        d[..n].copy_from_slice(&f[..n]);
        return;
    };
    let mut k = 0usize;
    v[0] = first;
    z[0] = -inf;
    z[1] = inf;
    for q in first + 1..n {
        if !finite(q) {
            continue;
        }
        let parabola_cross = |p: usize| {
            ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64)
        };
        let mut s = parabola_cross(v[k]);
        while s <= z[k] {
            k -= 1;
            s = parabola_cross(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        d[q] = dq * dq + f[p];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_box(n: usize) -> GroundTruthWorld {
        let mut w = GroundTruthWorld::solid(0.2, VoxelKey::ZERO, [n, n, n]).unwrap();
        for z in 1..n as i32 - 1 {
            for y in 1..n as i32 - 1 {
                for x in 1..n as i32 - 1 {
                    w.set_occupied(VoxelKey::new(x, y, z), false);
                }
            }
        }
        w.set_base_station(w.center_of(VoxelKey::splat(n as i32 / 2)));
        w
    }

    #[test]
    fn distance_field_matches_brute_force() {
        let mut w = open_box(12);
        w.set_occupied(VoxelKey::new(5, 6, 4), true);
        w.set_occupied(VoxelKey::new(3, 3, 8), true);
        let occ: Vec<Vec3> = (-1..13)
            .flat_map(|z| (-1..13).flat_map(move |y| (-1..13).map(move |x| VoxelKey::new(x, y, z))))
            .filter(|k| w.is_occupied(*k))
            .map(|k| w.center_of(k))
            .collect();
        let df = w.distance_field().to_vec();
        for i in 0..w.voxel_count() {
            let c = w.center_of(w.key_at_index(i));
            let brute = occ.iter().map(|p| p.distance(c)).fold(f64::INFINITY, f64::min);
            assert!((df[i] as f64 - brute).abs() < 1e-5, "{i}: {} vs {}", df[i], brute);
        }
    }

    #[test]
    fn flood_counts_connected_free_space() {
        let mut w = open_box(8);
        assert_eq!(w.flood_free(VoxelKey::splat(3)), 216);
        w.validate().unwrap();
        // a sealed pocket breaks connectivity
        for x in 1..7 {
            for y in 1..7 {
                w.set_occupied(VoxelKey::new(x, y, 2), true);
            }
        }
        assert!(matches!(w.validate(), Err(WorldError::Disconnected { .. })));
    }

    #[test]
    fn outside_is_occupied() {
        let w = open_box(6);
        assert!(w.is_occupied(VoxelKey::new(-3, 2, 2)));
        assert!(!w.is_clear(Vec3::new(-1.0, 0.5, 0.5), 0.0));
    }

    #[test]
    fn zero_length_segment_in_open_space() {
        let w = open_box(10);
        let p = w.center_of(VoxelKey::splat(5));
        assert!(w.collision_free_segment(p, p, 0.3));
    }
}
