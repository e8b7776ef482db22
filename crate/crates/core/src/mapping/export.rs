//! Map export formats.
//!
//! ASCII point cloud, one known voxel per line, sorted by key:
//!
//! ```text
//! # SCMAP1 resolution <f64>
//! <x> <y> <z> <occupied|free>
//! ```
//!
//! Binary snapshot of the sparse store, all integers and floats little
//! endian:
//!
//! ```text
//! magic   b"SCMB"
//! version u32 (= 1)
//! params  7 × f64: resolution hit miss clamp_min clamp_max occupied_threshold free_threshold
//! count   u64 bricks
//! brick   3 × i32 brick key, then 512 × f64 log-odds (NaN = unknown), x fastest
//! ```

use std::fmt::Write as _;

use crate::{Vec3, VoxelKey};

use super::{CellState, MapError, MapParams, OccupancyMap};

pub const MAP_ASCII_MAGIC: &str = "SCMAP1";
pub const SNAPSHOT_MAGIC: &[u8; 4] = b"SCMB";
pub const SNAPSHOT_VERSION: u32 = 1;

pub fn write_map_ascii(map: &OccupancyMap) -> String {
    let mut s = String::new();
    writeln!(s, "# {MAP_ASCII_MAGIC} resolution {}", map.resolution()).unwrap();
    for (k, l) in map.cells() {
        let state = match map.classify(l) {
            CellState::Occupied => "occupied",
            CellState::Free => "free",
            CellState::Unknown => continue,
        };
        let c = map.center_of(k);
        writeln!(s, "{} {} {} {state}", c.x, c.y, c.z).unwrap();
    }
    s
}

/// Rebuilds a map from the ASCII export; occupied and free cells get the
/// clamp limits as log-odds.
pub fn parse_map_ascii(text: &str) -> Result<OccupancyMap, MapError> {
    let bad = |m: String| MapError::Format(m);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty map file".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "#" || parts[1] != MAP_ASCII_MAGIC || parts[2] != "resolution" {
        return Err(bad(format!("bad header `{header}`")));
    }
    let res: f64 = parts[3].parse().map_err(|_| bad("bad resolution".into()))?;
    let mut map = OccupancyMap::new(MapParams { resolution: res, ..MapParams::default() })?;
    for (n, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(bad(format!("line {}: expected `x y z state`", n + 2)));
        }
        let mut xyz = [0.0; 3];
        for i in 0..3 {
            xyz[i] = f[i].parse().map_err(|_| bad(format!("line {}: bad coordinate `{}`", n + 2, f[i])))?;
        }
        let p = Vec3::from_array(xyz);
        let k = map.key_of(p);
        if map.center_of(k).distance(p) > 1e-6 * res {
            return Err(bad(format!("line {}: point is not a voxel center", n + 2)));
        }
        let state = match f[3] {
            "occupied" => CellState::Occupied,
            "free" => CellState::Free,
            s => return Err(bad(format!("line {}: unknown state `{s}`", n + 2))),
        };
        map.set_state(k, state);
    }
    Ok(map)
}

pub fn write_snapshot(map: &OccupancyMap) -> Vec<u8> {
    let p = map.params();
    let mut out = Vec::new();
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    for v in [p.resolution, p.hit, p.miss, p.clamp_min, p.clamp_max, p.occupied_threshold, p.free_threshold] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut bricks: Vec<_> = map.bricks().collect();
    bricks.sort_by_key(|(k, _)| k.to_array());
    out.extend_from_slice(&(bricks.len() as u64).to_le_bytes());
    for (k, b) in bricks {
        for c in k.to_array() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for v in b.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MapError> {
        if self.buf.len() < n {
            return Err(MapError::Format("truncated snapshot".into()));
        }
        let (h, t) = self.buf.split_at(n);
        self.buf = t;
        Ok(h)
    }
    fn u32(&mut self) -> Result<u32, MapError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn i32(&mut self) -> Result<i32, MapError> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, MapError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, MapError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_snapshot(bytes: &[u8]) -> Result<OccupancyMap, MapError> {
    let mut r = Reader { buf: bytes };
    if r.take(4)? != SNAPSHOT_MAGIC {
        return Err(MapError::Format("bad snapshot magic".into()));
    }
    let version = r.u32()?;
    if version != SNAPSHOT_VERSION {
        return Err(MapError::Format(format!("unsupported snapshot version {version}")));
    }
    let mut v = [0.0; 7];
    for x in &mut v {
        *x = r.f64()?;
    }
    let params = MapParams {
        resolution: v[0],
        hit: v[1],
        miss: v[2],
        clamp_min: v[3],
        clamp_max: v[4],
        occupied_threshold: v[5],
        free_threshold: v[6],
    };
    let n = r.u64()? as usize;
    let mut bricks = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let k = VoxelKey::new(r.i32()?, r.i32()?, r.i32()?);
        let mut cells = Vec::with_capacity(512);
        for _ in 0..512 {
            cells.push(r.f64()?);
        }
        bricks.push((k, cells));
    }
    if !r.buf.is_empty() {
        return Err(MapError::Format("trailing bytes after snapshot".into()));
    }
    OccupancyMap::from_bricks(params, bricks)
}
