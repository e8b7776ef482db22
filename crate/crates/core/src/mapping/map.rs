use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::spatial::{self, Aabb, FACE_NEIGHBORS};
use crate::worldsim::Scan;
use crate::{Vec3, VoxelKey};

use super::MapError;

const BRICK: i32 = 8;
const BRICK_CELLS: usize = (BRICK * BRICK * BRICK) as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

/// Log-odds sensor model and classification thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapParams {
    pub resolution: f64,
    pub hit: f64,
    pub miss: f64,
    pub clamp_min: f64,
    pub clamp_max: f64,
    pub occupied_threshold: f64,
    pub free_threshold: f64,
}

impl Default for MapParams {
    fn default() -> Self {
        Self {
            resolution: 0.2,
            hit: 0.85,
            miss: -0.40,
            clamp_min: -2.0,
            clamp_max: 3.5,
            occupied_threshold: 0.0,
            free_threshold: -0.1,
        }
    }
}

impl MapParams {
    pub fn validate(&self) -> Result<(), MapError> {
        let bad = |m: &str| Err(MapError::Params(m.to_string()));
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return bad("resolution must be positive");
        }
        if !(self.clamp_min < self.free_threshold && self.free_threshold < self.occupied_threshold) {
            return bad("thresholds must satisfy clamp_min < free_threshold < occupied_threshold");
        }
        if !(self.occupied_threshold <= self.clamp_max) {
            return bad("occupied_threshold must not exceed clamp_max");
        }
        if !(self.hit > 0.0 && self.miss < 0.0) {
            return bad("hit must be positive and miss negative");
        }
        Ok(())
    }
}

type Brick = [f64; BRICK_CELLS];

/// Result of integrating one scan.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanUpdate {
    /// Cells that became occupied, sorted.
    pub newly_occupied: Vec<VoxelKey>,
    pub state_changes: usize,
}

/// Tri-state log-odds voxel map.
///
/// Cells live in 8³ bricks addressed through a hash map, so a lookup is one
/// hash probe plus an array index. Missing cells (absent brick or NaN slot)
/// are unknown. The frontier set and the count of known cells are kept up to
/// date incrementally.
#[derive(Debug, Clone)]
pub struct OccupancyMap {
    params: MapParams,
    bricks: FxHashMap<VoxelKey, Box<Brick>>,
    known: usize,
    occupied: usize,
    frontier: FxHashSet<VoxelKey>,
}

#[inline]
fn split(key: VoxelKey) -> (VoxelKey, usize) {
    let b = VoxelKey::new(key.x.div_euclid(BRICK), key.y.div_euclid(BRICK), key.z.div_euclid(BRICK));
    let l = key - b * BRICK;
    (b, (l.x + BRICK * (l.y + BRICK * l.z)) as usize)
}

impl OccupancyMap {
    pub fn new(params: MapParams) -> Result<Self, MapError> {
        params.validate()?;
        Ok(Self {
            params,
            bricks: FxHashMap::default(),
            known: 0,
            occupied: 0,
            frontier: FxHashSet::default(),
        })
    }

    pub fn with_resolution(resolution: f64) -> Result<Self, MapError> {
        Self::new(MapParams { resolution, ..MapParams::default() })
    }

    pub fn params(&self) -> &MapParams {
        &self.params
    }

    pub fn resolution(&self) -> f64 {
        self.params.resolution
    }

    pub fn key_of(&self, p: Vec3) -> VoxelKey {
        spatial::voxel_key(p, self.params.resolution)
    }

    pub fn center_of(&self, key: VoxelKey) -> Vec3 {
        spatial::voxel_center(key, self.params.resolution)
    }

    pub fn log_odds(&self, key: VoxelKey) -> Option<f64> {
        let (b, i) = split(key);
        let v = self.bricks.get(&b)?[i];
        (!v.is_nan()).then_some(v)
    }

    pub fn classify(&self, l: f64) -> CellState {
        if l >= self.params.occupied_threshold {
            CellState::Occupied
        } else if l <= self.params.free_threshold {
            CellState::Free
        } else {
            CellState::Unknown
        }
    }

    #[inline]
    pub fn state(&self, key: VoxelKey) -> CellState {
        self.log_odds(key).map_or(CellState::Unknown, |l| self.classify(l))
    }

    pub fn state_at(&self, p: Vec3) -> CellState {
        self.state(self.key_of(p))
    }

    #[inline]
    pub fn is_free(&self, key: VoxelKey) -> bool {
        self.state(key) == CellState::Free
    }

    #[inline]
    pub fn is_occupied(&self, key: VoxelKey) -> bool {
        self.state(key) == CellState::Occupied
    }

    /// Cells with a stored value that is not classified unknown.
    pub fn known_count(&self) -> usize {
        self.known
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied
    }

    pub fn free_count(&self) -> usize {
        self.known - self.occupied
    }

    pub fn explored_volume(&self) -> f64 {
        self.known as f64 * self.params.resolution.powi(3)
    }

    pub fn stored_cells(&self) -> usize {
        self.bricks.values().map(|b| b.iter().filter(|v| !v.is_nan()).count()).sum()
    }

    /// Every stored cell with its log-odds, sorted by key.
    pub fn cells(&self) -> Vec<(VoxelKey, f64)> {
        let mut out = Vec::new();
        for (bk, brick) in &self.bricks {
            for (i, v) in brick.iter().enumerate() {
                if !v.is_nan() {
                    let i = i as i32;
                    let l = VoxelKey::new(i % BRICK, (i / BRICK) % BRICK, i / (BRICK * BRICK));
                    out.push((*bk * BRICK + l, *v));
                }
            }
        }
        out.sort_by_key(|(k, _)| k.to_array());
        out
    }

    pub fn occupied_keys(&self) -> Vec<VoxelKey> {
        self.cells()
            .into_iter()
            .filter(|(_, l)| self.classify(*l) == CellState::Occupied)
            .map(|(k, _)| k)
            .collect()
    }

    fn write(&mut self, key: VoxelKey, value: f64) -> (CellState, CellState) {
        let (b, i) = split(key);
        let brick = self.bricks.entry(b).or_insert_with(|| Box::new([f64::NAN; BRICK_CELLS]));
        let old = brick[i];
        brick[i] = value;
        let before = if old.is_nan() { CellState::Unknown } else { self.classify(old) };
        let after = self.classify(value);
        if before != after {
            self.known = self.known + (after != CellState::Unknown) as usize - (before != CellState::Unknown) as usize;
            self.occupied =
                self.occupied + (after == CellState::Occupied) as usize - (before == CellState::Occupied) as usize;
        }
        (before, after)
    }

    fn is_frontier_cell(&self, key: VoxelKey) -> bool {
        self.is_free(key) && FACE_NEIGHBORS.iter().any(|o| self.state(key + *o) == CellState::Unknown)
    }

    fn refresh_frontier(&mut self, changed: &[VoxelKey]) {
        let mut touched: FxHashSet<VoxelKey> = FxHashSet::default();
        for k in changed {
            touched.insert(*k);
            for o in FACE_NEIGHBORS {
                touched.insert(*k + o);
            }
        }
        for k in touched {
            if self.is_frontier_cell(k) {
                self.frontier.insert(k);
            } else {
                self.frontier.remove(&k);
            }
        }
    }

    /// Overwrites a cell's log-odds (clamped). Used to build maps directly.
    pub fn set_log_odds(&mut self, key: VoxelKey, value: f64) {
        let v = value.clamp(self.params.clamp_min, self.params.clamp_max);
        let (before, after) = self.write(key, v);
        if before != after {
            self.refresh_frontier(&[key]);
        }
    }

    pub fn set_state(&mut self, key: VoxelKey, state: CellState) {
        match state {
            CellState::Occupied => self.set_log_odds(key, self.params.clamp_max),
            CellState::Free => self.set_log_odds(key, self.params.clamp_min),
            CellState::Unknown => {
                let (b, i) = split(key);
                let before = self.state(key);
                if let Some(brick) = self.bricks.get_mut(&b) {
                    brick[i] = f64::NAN;
                }
                if before != CellState::Unknown {
                    self.known -= 1;
                    if before == CellState::Occupied {
                        self.occupied -= 1;
                    }
                    self.refresh_frontier(&[key]);
                }
            }
        }
    }

    fn bump(&mut self, key: VoxelKey, delta: f64, changed: &mut Vec<VoxelKey>, newly_occupied: &mut Vec<VoxelKey>) {
        let cur = self.log_odds(key).unwrap_or(0.0);
        let v = (cur + delta).clamp(self.params.clamp_min, self.params.clamp_max);
        let (before, after) = self.write(key, v);
        if before != after {
            changed.push(key);
            if after == CellState::Occupied {
                newly_occupied.push(key);
            }
        }
    }

    /// Bayesian ray update. Each return marks the voxels from the origin up
    /// to (excluding) its endpoint voxel as misses and the endpoint voxel as a
    /// hit; rays without a return mark every voxel up to `max_range` as
    /// misses. Within one scan a voxel is updated at most once, and a hit
    /// overrides misses.
    pub fn integrate_scan(&mut self, scan: &Scan) -> ScanUpdate {
        let res = self.params.resolution;
        let origin = scan.origin.position;
        let nudge = 1e-4 * res;
        let mut hits: FxHashSet<VoxelKey> = FxHashSet::default();
        let mut misses: FxHashSet<VoxelKey> = FxHashSet::default();
        for r in &scan.returns {
            if !(r.range > 0.0) || !r.range.is_finite() {
                continue;
            }
            let end = spatial::voxel_key(origin + r.direction * (r.range + nudge), res);
            hits.insert(end);
            spatial::traverse_voxels(origin, r.direction, r.range + nudge, res, |k, _| {
                if k == end {
                    return false;
                }
                misses.insert(k);
                true
            });
        }
        for d in &scan.misses {
            spatial::traverse_voxels(origin, *d, scan.max_range, res, |k, _| {
                misses.insert(k);
                true
            });
        }
        let mut order: Vec<VoxelKey> = misses.difference(&hits).copied().collect();
        order.sort_unstable_by_key(|k| k.to_array());
        let mut hit_order: Vec<VoxelKey> = hits.into_iter().collect();
        hit_order.sort_unstable_by_key(|k| k.to_array());
        let mut changed = Vec::new();
        let mut newly = Vec::new();
        for k in order {
            self.bump(k, self.params.miss, &mut changed, &mut newly);
        }
        for k in hit_order {
            self.bump(k, self.params.hit, &mut changed, &mut newly);
        }
        self.refresh_frontier(&changed);
        newly.sort_unstable_by_key(|k| k.to_array());
        ScanUpdate { state_changes: changed.len(), newly_occupied: newly }
    }

    pub fn frontier_count(&self) -> usize {
        self.frontier.len()
    }

    /// Free cells with at least one unknown face neighbour, optionally
    /// restricted to cells whose center lies in `bounds`, in lexicographic
    /// key order.
    pub fn extract_frontiers(&self, bounds: Option<&Aabb>) -> Vec<VoxelKey> {
        let mut out: Vec<VoxelKey> = self
            .frontier
            .iter()
            .copied()
            .filter(|k| bounds.is_none_or(|b| b.contains(self.center_of(*k))))
            .collect();
        out.sort_unstable_by_key(|k| k.to_array());
        out
    }

    /// Unknown-to-free cell ratio inside the cube of half-size `radius`
    /// around `center` (cells whose centers lie in the cube). `+∞` when the
    /// cube holds no free cell.
    pub fn unknown_free_ratio(&self, center: Vec3, radius: f64) -> f64 {
        let (unknown, free) = self.count_unknown_free(&Aabb::around(center, radius));
        if free == 0 {
            f64::INFINITY
        } else {
            unknown as f64 / free as f64
        }
    }

    /// (unknown, free) cell counts over the cells centered in `region`.
    pub fn count_unknown_free(&self, region: &Aabb) -> (usize, usize) {
        let (lo, hi) = region.key_range(self.params.resolution);
        if lo.cmpgt(hi).any() {
            return (0, 0);
        }
        let blo = VoxelKey::new(lo.x.div_euclid(BRICK), lo.y.div_euclid(BRICK), lo.z.div_euclid(BRICK));
        let bhi = VoxelKey::new(hi.x.div_euclid(BRICK), hi.y.div_euclid(BRICK), hi.z.div_euclid(BRICK));
        let (mut unknown, mut free) = (0usize, 0usize);
        for bz in blo.z..=bhi.z {
            for by in blo.y..=bhi.y {
                for bx in blo.x..=bhi.x {
                    let bk = VoxelKey::new(bx, by, bz);
                    let base = bk * BRICK;
                    let clo = lo.max(base);
                    let chi = hi.min(base + VoxelKey::splat(BRICK - 1));
                    let n = ((chi - clo) + VoxelKey::ONE).as_dvec3();
                    let cells = (n.x * n.y * n.z) as usize;
                    let Some(brick) = self.bricks.get(&bk) else {
                        unknown += cells;
                        continue;
                    };
                    for z in clo.z..=chi.z {
                        for y in clo.y..=chi.y {
                            for x in clo.x..=chi.x {
                                let l = VoxelKey::new(x, y, z) - base;
                                let v = brick[(l.x + BRICK * (l.y + BRICK * l.z)) as usize];
                                let s = if v.is_nan() { CellState::Unknown } else { self.classify(v) };
                                match s {
                                    CellState::Unknown => unknown += 1,
                                    CellState::Free => free += 1,
                                    CellState::Occupied => {}
                                }
                            }
                        }
                    }
                }
            }
        }
        (unknown, free)
    }

    pub(crate) fn bricks(&self) -> impl Iterator<Item = (&VoxelKey, &Brick)> {
        self.bricks.iter().map(|(k, b)| (k, &**b))
    }

    pub(crate) fn from_bricks(params: MapParams, bricks: Vec<(VoxelKey, Vec<f64>)>) -> Result<Self, MapError> {
        let mut map = Self::new(params)?;
        for (bk, vals) in bricks {
            if vals.len() != BRICK_CELLS {
                return Err(MapError::Format("brick has wrong cell count".into()));
            }
            for (i, v) in vals.into_iter().enumerate() {
                if v.is_nan() {
                    continue;
                }
                if !(v >= params.clamp_min && v <= params.clamp_max) {
                    return Err(MapError::Format(format!("log-odds {v} outside the clamp range")));
                }
                let i = i as i32;
                let key = bk * BRICK + VoxelKey::new(i % BRICK, (i / BRICK) % BRICK, i / (BRICK * BRICK));
                map.write(key, v);
            }
        }
        map.rebuild_frontier();
        Ok(map)
    }

    fn rebuild_frontier(&mut self) {
        let keys: Vec<VoxelKey> = self.cells().into_iter().map(|(k, _)| k).collect();
        self.frontier = keys.into_iter().filter(|k| self.is_frontier_cell(*k)).collect();
    }

    /// Brute-force frontier enumeration over every stored cell; reference for
    /// the incremental set.
    pub fn frontiers_exhaustive(&self) -> Vec<VoxelKey> {
        let mut out: Vec<VoxelKey> =
            self.cells().into_iter().map(|(k, _)| k).filter(|k| self.is_frontier_cell(*k)).collect();
        out.sort_unstable_by_key(|k| k.to_array());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldsim::{Pose, Return};

    fn map() -> OccupancyMap {
        OccupancyMap::with_resolution(0.2).unwrap()
    }

    #[test]
    fn single_return_updates_ray_and_endpoint() {
        let mut m = map();
        let origin = Vec3::new(0.1, 0.1, 0.1);
        let mut scan = Scan::empty(Pose::new(origin, 0.0), 50.0);
        scan.returns.push(Return { direction: Vec3::X, range: 5.0, intensity: 0.9 });
        m.integrate_scan(&scan);
        let end = m.key_of(origin + Vec3::X * 5.0);
        assert_eq!(end, VoxelKey::new(25, 0, 0));
        assert_eq!(m.log_odds(end), Some(0.85));
        for x in 0..25 {
            assert_eq!(m.log_odds(VoxelKey::new(x, 0, 0)), Some(-0.40), "x={x}");
        }
        assert_eq!(m.stored_cells(), 26);
        assert_eq!(m.state(VoxelKey::new(0, 1, 0)), CellState::Unknown);
    }

    #[test]
    fn repeated_hits_clamp_and_stay_occupied() {
        let mut m = map();
        let mut scan = Scan::empty(Pose::new(Vec3::splat(0.1), 0.0), 50.0);
        scan.returns.push(Return { direction: Vec3::X, range: 2.0, intensity: 0.9 });
        let end = m.key_of(Vec3::new(2.1, 0.1, 0.1));
        for _ in 0..10 {
            m.integrate_scan(&scan);
        }
        assert_eq!(m.log_odds(end), Some(3.5));
        assert_eq!(m.state(end), CellState::Occupied);
        assert_eq!(m.log_odds(VoxelKey::ZERO), Some(-2.0));
    }

    #[test]
    fn isolated_free_cell_is_a_frontier() {
        let mut m = map();
        m.set_state(VoxelKey::new(3, 4, 5), CellState::Free);
        assert_eq!(m.extract_frontiers(None), vec![VoxelKey::new(3, 4, 5)]);
        assert_eq!(m.known_count(), 1);
    }

    #[test]
    fn closed_known_block_has_no_frontier() {
        let mut m = map();
        for z in 0..5 {
            for y in 0..5 {
                for x in 0..5 {
                    let shell = [x, y, z].iter().any(|c| *c == 0 || *c == 4);
                    let s = if shell { CellState::Occupied } else { CellState::Free };
                    m.set_state(VoxelKey::new(x, y, z), s);
                }
            }
        }
        assert!(m.extract_frontiers(None).is_empty());
    }

    #[test]
    fn ratio_sentinels() {
        let mut m = map();
        assert_eq!(m.unknown_free_ratio(Vec3::ZERO, 1.0), f64::INFINITY);
        // cube of half-size 0.4 around the origin holds keys -2..=1 per axis
        for z in -2..2 {
            for y in -2..2 {
                for x in -2..2 {
                    m.set_state(VoxelKey::new(x, y, z), CellState::Free);
                }
            }
        }
        assert_eq!(m.unknown_free_ratio(Vec3::ZERO, 0.4), 0.0);
        for y in -2..2 {
            for x in -2..2 {
                for z in 0..2 {
                    m.set_state(VoxelKey::new(x, y, z), CellState::Unknown);
                }
            }
        }
        assert_eq!(m.unknown_free_ratio(Vec3::ZERO, 0.4), 1.0);
    }
}
