//! C ABI over the `cavenav` crate.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `cavenav_*_new`/`generate`/`load`/`run` function and released with the
//! matching `cavenav_*_free`. Fallible functions return a [`CavenavStatus`];
//! the message of the last error on the calling thread is available through
//! [`cavenav_last_error`]. Panics are caught at the boundary and reported as
//! [`CavenavStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use cavenav::fleet::{run_mission, run_mission_in, FleetError, MissionConfig, MissionOutcome};
use cavenav::homing::{homing_path, HomingParams, HomingTree, NodeKind};
use cavenav::worldsim::{generate_cave, load_world, save_world, CaveParams, GroundTruthWorld, WorldError};
use cavenav::Vec3;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CavenavStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed text, parameters out of range or an unknown index.
    InvalidArgument = 2,
    Io = 3,
    /// The simulation itself failed.
    Runtime = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavenavVec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<CavenavVec3> for Vec3 {
    fn from(v: CavenavVec3) -> Self {
        Vec3::new(v.x, v.y, v.z)
    }
}

impl From<Vec3> for CavenavVec3 {
    fn from(v: Vec3) -> Self {
        CavenavVec3 { x: v.x, y: v.y, z: v.z }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CavenavNodeKind {
    LandedRobot = 1,
    DeployedBeacon = 2,
    Pose = 3,
}

impl From<CavenavNodeKind> for NodeKind {
    fn from(k: CavenavNodeKind) -> Self {
        match k {
            CavenavNodeKind::LandedRobot => NodeKind::LandedRobot,
            CavenavNodeKind::DeployedBeacon => NodeKind::DeployedBeacon,
            CavenavNodeKind::Pose => NodeKind::Pose,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavenavHomingParams {
    /// Minimum spacing of pose nodes (m).
    pub d_e: f64,
    /// Radio range (m).
    pub d_c: f64,
    /// Speed used for flight-time estimates (m/s).
    pub v_nominal: f64,
    /// Safety margin added to the homing estimate (s).
    pub reserve_time: f64,
}

impl From<CavenavHomingParams> for HomingParams {
    fn from(p: CavenavHomingParams) -> Self {
        HomingParams { d_e: p.d_e, d_c: p.d_c, v_nominal: p.v_nominal, reserve_time: p.reserve_time }
    }
}

/// Line-of-flight test between `a` and `b`; return true when free.
pub type CavenavFreeRayFn = Option<unsafe extern "C" fn(ctx: *mut c_void, a: CavenavVec3, b: CavenavVec3) -> bool>;

/// Ground-truth voxel world.
pub struct CavenavWorld(GroundTruthWorld);

/// Finished mission: metrics, trajectories, merged map and homing tree.
pub struct CavenavOutcome(MissionOutcome);

/// Homing tree of pose and communication nodes.
pub struct CavenavTree(HomingTree);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

struct Failure(CavenavStatus, String);

impl From<WorldError> for Failure {
    fn from(e: WorldError) -> Self {
        let status = if matches!(e, WorldError::Io(_)) { CavenavStatus::Io } else { CavenavStatus::InvalidArgument };
        Failure(status, e.to_string())
    }
}

impl From<FleetError> for Failure {
    fn from(e: FleetError) -> Self {
        let status = match e {
            FleetError::Config(_) | FleetError::World(_) | FleetError::Format(_) => CavenavStatus::InvalidArgument,
            FleetError::Io(_) => CavenavStatus::Io,
            _ => CavenavStatus::Runtime,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl std::fmt::Display) -> Failure {
    Failure(CavenavStatus::InvalidArgument, msg.to_string())
}

/// Runs `f`, mapping errors and panics onto a status with a stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CavenavStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CavenavStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            CavenavStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(CavenavStatus::NullPointer, format!("{what} is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(CavenavStatus::NullPointer, format!("{what} is null")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(CavenavStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|e| invalid(format!("{what}: {e}")))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(CavenavStatus::NullPointer, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

/// Copies `s` with a terminating NUL into `buf` when it fits. Always stores
/// the required size (including the NUL) in `*needed` when non-null.
unsafe fn copy_out(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), Failure> {
    let n = s.len() + 1;
    if !needed.is_null() {
        needed.write(n);
    }
    if buf.is_null() {
        return if len == 0 { Ok(()) } else { Err(Failure(CavenavStatus::NullPointer, "buf is null".into())) };
    }
    if len < n {
        return Err(invalid(format!("buffer of {len} bytes, {n} needed")));
    }
    std::ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
    buf.add(s.len()).write(0);
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length plus
/// one. Passing a null `buf` only queries the length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cavenav_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            buf.add(n).write(0);
        }
        msg.len() + 1
    })
}

// ---------------------------------------------------------------------------
// Worlds

/// Generates a cave. `params_toml` may be null for the default parameters.
///
/// # Safety
/// `params_toml` must be null or a NUL-terminated string; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cavenav_world_generate(
    seed: u64,
    params_toml: *const c_char,
    out: *mut *mut CavenavWorld,
) -> CavenavStatus {
    guard(|| {
        let params: CaveParams = if params_toml.is_null() {
            CaveParams::default()
        } else {
            toml::from_str(text(params_toml, "params_toml")?).map_err(invalid)?
        };
        let world = generate_cave(seed, &params)?;
        put(out, Box::into_raw(Box::new(CavenavWorld(world))), "out")
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cavenav_world_load(path: *const c_char, out: *mut *mut CavenavWorld) -> CavenavStatus {
    guard(|| {
        let world = load_world(text(path, "path")?)?;
        put(out, Box::into_raw(Box::new(CavenavWorld(world))), "out")
    })
}

/// # Safety
/// `world` must come from this library; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cavenav_world_save(world: *const CavenavWorld, path: *const c_char) -> CavenavStatus {
    guard(|| Ok(save_world(&deref(world, "world")?.0, text(path, "path")?)?))
}

/// Free volume in cubic metres.
///
/// # Safety
/// `world` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cavenav_world_free_volume(world: *const CavenavWorld, out: *mut f64) -> CavenavStatus {
    guard(|| put(out, deref(world, "world")?.0.free_volume(), "out"))
}

/// Points outside the world count as occupied.
///
/// # Safety
/// `world` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cavenav_world_is_occupied(
    world: *const CavenavWorld,
    p: CavenavVec3,
    out: *mut bool,
) -> CavenavStatus {
    guard(|| put(out, deref(world, "world")?.0.is_occupied_at(p.into()), "out"))
}

/// # Safety
/// `world` must be null or come from this library, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cavenav_world_free(world: *mut CavenavWorld) {
    if !world.is_null() {
        drop(Box::from_raw(world));
    }
}

// ---------------------------------------------------------------------------
// Missions

/// Runs the mission described by `scenario_toml`. With a non-null `world`
/// the scenario's world section is ignored; otherwise the world is built
/// from it, relative file paths resolving against `base_dir` (may be null).
///
/// # Safety
/// Strings must be NUL-terminated; `world` null or from this library; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cavenav_mission_run(
    scenario_toml: *const c_char,
    world: *const CavenavWorld,
    base_dir: *const c_char,
    out: *mut *mut CavenavOutcome,
) -> CavenavStatus {
    guard(|| {
        let cfg = MissionConfig::from_toml(text(scenario_toml, "scenario_toml")?)?;
        let outcome = if world.is_null() {
            let dir = if base_dir.is_null() { None } else { Some(PathBuf::from(text(base_dir, "base_dir")?)) };
            run_mission(&cfg, dir.as_deref())?
        } else {
            cfg.validate()?;
            run_mission_in(&deref(world, "world")?.0, &cfg)?
        };
        put(out, Box::into_raw(Box::new(CavenavOutcome(outcome))), "out")
    })
}

/// # Safety
/// `outcome` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cavenav_outcome_robot_count(outcome: *const CavenavOutcome, out: *mut usize) -> CavenavStatus {
    guard(|| put(out, deref(outcome, "outcome")?.0.metrics.robot.len(), "out"))
}

/// Seconds from launch to the start of homing for `robot`.
///
/// # Safety
/// `outcome` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cavenav_outcome_exploration_time(
    outcome: *const CavenavOutcome,
    robot: usize,
    out: *mut f64,
) -> CavenavStatus {
    guard(|| {
        let m = &deref(outcome, "outcome")?.0.metrics;
        let r = m.robot.get(robot).ok_or_else(|| invalid(format!("robot {robot} of {}", m.robot.len())))?;
        put(out, r.exploration_time, "out")
    })
}

/// # Safety
/// `outcome` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cavenav_outcome_collisions(outcome: *const CavenavOutcome, out: *mut usize) -> CavenavStatus {
    guard(|| put(out, deref(outcome, "outcome")?.0.metrics.mission.collisions, "out"))
}

/// Writes the metrics as TOML into `buf`. `*needed` receives the size
/// including the NUL; call with a null `buf` and `len` 0 to query it.
///
/// # Safety
/// `outcome` must come from this library; `buf` null or `len` writable
/// bytes; `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn cavenav_outcome_metrics_toml(
    outcome: *const CavenavOutcome,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> CavenavStatus {
    guard(|| copy_out(&deref(outcome, "outcome")?.0.metrics.to_toml(), buf, len, needed))
}

/// Writes metrics, trajectories, events, map and tree files into `dir`.
///
/// # Safety
/// `outcome` must come from this library; `dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cavenav_outcome_write_artifacts(outcome: *const CavenavOutcome, dir: *const c_char) -> CavenavStatus {
    guard(|| Ok(deref(outcome, "outcome")?.0.write_artifacts(text(dir, "dir")?.as_ref())?))
}

/// # Safety
/// `outcome` must be null or come from this library, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cavenav_outcome_free(outcome: *mut CavenavOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

// ---------------------------------------------------------------------------
// Homing trees

struct CallbackRay {
    f: CavenavFreeRayFn,
    ctx: *mut c_void,
}

impl cavenav::homing::FreeRay for CallbackRay {
    fn free_ray(&self, a: Vec3, b: Vec3) -> bool {
        match self.f {
            Some(f) => unsafe { f(self.ctx, a.into(), b.into()) },
            None => true,
        }
    }
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cavenav_tree_new(
    base_id: u64,
    base: CavenavVec3,
    params: CavenavHomingParams,
    out: *mut *mut CavenavTree,
) -> CavenavStatus {
    guard(|| {
        let tree = HomingTree::new(base_id, base.into(), params.into()).map_err(invalid)?;
        put(out, Box::into_raw(Box::new(CavenavTree(tree))), "out")
    })
}

/// Inserts a node. A null `ray` treats every line of flight as free.
/// `*inserted` is false when the tree rejected the node (too close to
/// another pose, not visible, duplicate id).
///
/// # Safety
/// `tree` must come from this library; `ray` is called with `ctx` during
/// the call only; `inserted` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cavenav_tree_insert(
    tree: *mut CavenavTree,
    id: u64,
    kind: CavenavNodeKind,
    position: CavenavVec3,
    ray: CavenavFreeRayFn,
    ctx: *mut c_void,
    inserted: *mut bool,
) -> CavenavStatus {
    guard(|| {
        let t = deref_mut(tree, "tree")?;
        let r = t.0.insert(id, kind.into(), position.into(), &CallbackRay { f: ray, ctx });
        put(inserted, r.is_inserted(), "inserted")
    })
}

/// # Safety
/// `tree` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cavenav_tree_len(tree: *const CavenavTree, out: *mut usize) -> CavenavStatus {
    guard(|| put(out, deref(tree, "tree")?.0.len(), "out"))
}

/// Estimated flight time from node `id` to its communication node.
///
/// # Safety
/// `tree` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cavenav_tree_accumulated_cost(tree: *const CavenavTree, id: u64, out: *mut f64) -> CavenavStatus {
    guard(|| put(out, deref(tree, "tree")?.0.accumulated_cost(id).map_err(invalid)?, "out"))
}

/// Parent of node `id`; `*has_parent` is false for the base station.
///
/// # Safety
/// `tree` must come from this library; `parent` and `has_parent` writable.
#[no_mangle]
pub unsafe extern "C" fn cavenav_tree_parent(
    tree: *const CavenavTree,
    id: u64,
    parent: *mut u64,
    has_parent: *mut bool,
) -> CavenavStatus {
    guard(|| {
        let p = deref(tree, "tree")?.0.parent(id).map_err(invalid)?;
        put(has_parent, p.is_some(), "has_parent")?;
        put(parent, p.unwrap_or(0), "parent")
    })
}

/// Homing route from `current`: landing spot in radio range of a
/// communication node and its flight-time cost.
///
/// # Safety
/// `tree` must come from this library; `ray` as for [`cavenav_tree_insert`];
/// `landing` and `cost` writable.
#[no_mangle]
pub unsafe extern "C" fn cavenav_tree_homing_route(
    tree: *const CavenavTree,
    current: CavenavVec3,
    ray: CavenavFreeRayFn,
    ctx: *mut c_void,
    landing: *mut CavenavVec3,
    cost: *mut f64,
) -> CavenavStatus {
    guard(|| {
        let route = homing_path(&deref(tree, "tree")?.0, current.into(), &CallbackRay { f: ray, ctx })
            .map_err(|e| Failure(CavenavStatus::Runtime, e.to_string()))?;
        put(landing, route.landing.into(), "landing")?;
        put(cost, route.cost, "cost")
    })
}

/// # Safety
/// `tree` must be null or come from this library, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cavenav_tree_free(tree: *mut CavenavTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}
