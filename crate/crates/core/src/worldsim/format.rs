//! `SCSW1` world files.
//!
//! Plain ASCII, newline separated, one `key value…` record per header line:
//!
//! ```text
//! SCSW1
//! resolution <f64>
//! min_key <i32> <i32> <i32>
//! dims <usize> <usize> <usize>
//! base_station <f64> <f64> <f64>
//! spawn_points <count>
//! <f64> <f64> <f64>            (count lines)
//! runs <count> first <occupied|free>
//! <u64> <u64> …                (run lengths, whitespace separated, any line breaks)
//! end
//! ```
//!
//! The payload run-length encodes the lattice in linear order (x fastest,
//! then y, then z). Runs alternate state starting with `first`, every run is
//! non-empty and the lengths sum to `dims.x * dims.y * dims.z`. Floats are
//! written in shortest round-trip form so save/load is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::{Vec3, VoxelKey};

use super::{GroundTruthWorld, WorldError};

pub const WORLD_MAGIC: &str = "SCSW1";

pub fn write_world(world: &GroundTruthWorld) -> String {
    let mut s = String::new();
    let v = |p: Vec3| format!("{} {} {}", p.x, p.y, p.z);
    let k = world.min_key();
    let d = world.dims();
    writeln!(s, "{WORLD_MAGIC}").unwrap();
    writeln!(s, "resolution {}", world.resolution()).unwrap();
    writeln!(s, "min_key {} {} {}", k.x, k.y, k.z).unwrap();
    writeln!(s, "dims {} {} {}", d[0], d[1], d[2]).unwrap();
    writeln!(s, "base_station {}", v(world.base_station())).unwrap();
    writeln!(s, "spawn_points {}", world.spawn_points().len()).unwrap();
    for p in world.spawn_points() {
        writeln!(s, "{}", v(*p)).unwrap();
    }
    let n = world.voxel_count();
    let bits = world.raw_bits();
    let bit = |i: usize| bits[i / 64] >> (i % 64) & 1 == 1;
    let mut runs = Vec::new();
    let first = bit(0);
    let mut cur = first;
    let mut len = 0u64;
    for i in 0..n {
        if bit(i) == cur {
            len += 1;
        } else {
            runs.push(len);
            cur = !cur;
            len = 1;
        }
    }
    runs.push(len);
    writeln!(
        s,
        "runs {} first {}",
        runs.len(),
        if first { "occupied" } else { "free" }
    )
    .unwrap();
    for chunk in runs.chunks(32) {
        let line: Vec<String> = chunk.iter().map(|r| r.to_string()).collect();
        writeln!(s, "{}", line.join(" ")).unwrap();
    }
    writeln!(s, "end").unwrap();
    s
}

pub fn save_world(world: &GroundTruthWorld, path: impl AsRef<Path>) -> Result<(), WorldError> {
    std::fs::write(path, write_world(world))?;
    Ok(())
}

pub fn load_world(path: impl AsRef<Path>) -> Result<GroundTruthWorld, WorldError> {
    parse_world(&std::fs::read_to_string(path)?)
}

fn perr(field: &str, reason: impl Into<String>) -> WorldError {
    WorldError::Parse { field: field.to_string(), reason: reason.into() }
}

struct Lines<'a> {
    it: std::iter::Peekable<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn record(&mut self, key: &str) -> Result<Vec<&'a str>, WorldError> {
        let line = self.it.next().ok_or_else(|| perr(key, "unexpected end of file"))?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some(k) if k == key => Ok(parts.collect()),
            Some(k) => Err(perr(key, format!("expected `{key}`, found `{k}`"))),
            None => Err(perr(key, "empty line")),
        }
    }

    fn raw(&mut self, field: &str) -> Result<&'a str, WorldError> {
        self.it.next().ok_or_else(|| perr(field, "unexpected end of file"))
    }
}

fn nums<T: std::str::FromStr>(field: &str, parts: &[&str], n: usize) -> Result<Vec<T>, WorldError> {
    if parts.len() != n {
        return Err(perr(field, format!("expected {n} values, found {}", parts.len())));
    }
    parts
        .iter()
        .map(|p| p.parse::<T>().map_err(|_| perr(field, format!("cannot parse `{p}`"))))
        .collect()
}

fn vec3(field: &str, parts: &[&str]) -> Result<Vec3, WorldError> {
    let v: Vec<f64> = nums(field, parts, 3)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(perr(field, "non-finite coordinate"));
    }
    Ok(Vec3::new(v[0], v[1], v[2]))
}

pub fn parse_world(text: &str) -> Result<GroundTruthWorld, WorldError> {
    let mut lines = Lines { it: text.lines().peekable() };
    let magic = lines.it.next().map(str::trim);
    match magic {
        None | Some("") => return Err(perr("magic", "empty file")),
        Some(m) if m != WORLD_MAGIC => return Err(perr("magic", format!("expected {WORLD_MAGIC}, found `{m}`"))),
        _ => {}
    }
    let res: Vec<f64> = nums("resolution", &lines.record("resolution")?, 1)?;
    let resolution = res[0];
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(perr("resolution", "must be positive"));
    }
    let k: Vec<i32> = nums("min_key", &lines.record("min_key")?, 3)?;
    let d: Vec<usize> = nums("dims", &lines.record("dims")?, 3)?;
    let base = vec3("base_station", &lines.record("base_station")?)?;
    let count: Vec<usize> = nums("spawn_points", &lines.record("spawn_points")?, 1)?;
    let mut spawns = Vec::with_capacity(count[0]);
    for _ in 0..count[0] {
        let line = lines.raw("spawn_points")?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        spawns.push(vec3("spawn_points", &parts)?);
    }
    let runs_hdr = lines.record("runs")?;
    if runs_hdr.len() != 3 || runs_hdr[1] != "first" {
        return Err(perr("runs", "expected `runs <count> first <occupied|free>`"));
    }
    let n_runs: usize = runs_hdr[0].parse().map_err(|_| perr("runs", "bad run count"))?;
    let mut state = match runs_hdr[2] {
        "occupied" => true,
        "free" => false,
        other => return Err(perr("runs", format!("unknown state `{other}`"))),
    };
    let mut world = GroundTruthWorld::solid(resolution, VoxelKey::new(k[0], k[1], k[2]), [d[0], d[1], d[2]])
        .map_err(|e| perr("dims", e.to_string()))?;
    let total = world.voxel_count();
    let mut bits = vec![0u64; total.div_ceil(64)];
    let mut pos = 0usize;
    let mut seen = 0usize;
    loop {
        let line = lines.raw("payload")?;
        if line.trim() == "end" {
            break;
        }
        for tok in line.split_whitespace() {
            let len: usize = tok.parse().map_err(|_| perr("payload", format!("bad run length `{tok}`")))?;
            if len == 0 {
                return Err(perr("payload", "zero-length run"));
            }
            if pos + len > total {
                return Err(perr("payload", "runs exceed lattice size"));
            }
            if state {
                for i in pos..pos + len {
                    bits[i / 64] |= 1 << (i % 64);
                }
            }
            pos += len;
            seen += 1;
            state = !state;
        }
    }
    if seen != n_runs {
        return Err(perr("runs", format!("header declares {n_runs} runs, payload has {seen}")));
    }
    if pos != total {
        return Err(perr("payload", format!("runs cover {pos} of {total} voxels")));
    }
    world.set_bits(bits);
    world.set_base_station(base);
    world.set_spawn_points(spawns);
    world.validate()?;
    Ok(world)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldsim::WorldBuilder;

    fn small() -> GroundTruthWorld {
        let mut b = WorldBuilder::solid(0.2, crate::spatial::Aabb::new(Vec3::ZERO, Vec3::splat(2.0))).unwrap();
        b.carve_box(Vec3::splat(0.4), Vec3::splat(1.6));
        b.finish(Vec3::splat(1.0), vec![Vec3::new(0.7, 1.0, 1.0)]).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let w = small();
        let text = write_world(&w);
        let back = parse_world(&text).unwrap();
        assert_eq!(w, back);
        assert_eq!(text, write_world(&back));
    }

    #[test]
    fn empty_file_is_rejected() {
        assert!(matches!(parse_world(""), Err(WorldError::Parse { field, .. }) if field == "magic"));
    }

    #[test]
    fn base_inside_rock_names_the_field() {
        let text = write_world(&small()).replace("base_station 1 1 1", "base_station 0.1 0.1 0.1");
        match parse_world(&text) {
            Err(WorldError::Invalid { field, .. }) => assert_eq!(field, "base_station"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let text = write_world(&small());
        let cut: String = text.lines().filter(|l| !l.starts_with("end")).collect::<Vec<_>>().join("\n");
        assert!(parse_world(&cut).is_err());
    }
}
