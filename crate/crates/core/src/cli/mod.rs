//! Command implementations behind the `cavenav` binary. Each returns the
//! text it would print so the commands can be driven from tests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::fleet::{
    homing_experiment, Engine, FleetError, HomingMode, MissionConfig, MissionOutcome, MissionMetrics,
    BASELINE_METRICS_FILE,
};
use crate::mapping::{map_accuracy, parse_map_ascii, MapError};
use crate::worldsim::{generate_cave, load_world, save_world, CaveParams, GroundTruthWorld, WorldError};

pub const TABLE_FILE: &str = "homing_table.txt";
pub const EXPERIMENT_CSV: &str = "homing_experiment.csv";
pub const DEFAULT_REPS: usize = 6;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad scenario, parameters or input files: exit code 2.
    #[error("{0}")]
    Input(String),
    /// The command failed while running: exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

impl From<FleetError> for CliError {
    fn from(e: FleetError) -> Self {
        match e {
            FleetError::Config(_) | FleetError::World(_) | FleetError::Format(_) => input(e),
            _ => runtime(e),
        }
    }
}

/// Reads a scenario file; `seed` replaces the file's mission seed.
pub fn load_scenario(path: &Path, seed: Option<u64>) -> Result<MissionConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let mut cfg = MissionConfig::from_toml(&text).map_err(|e| input(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn scenario_dir(path: &Path) -> Option<PathBuf> {
    path.parent().map(Path::to_path_buf)
}

/// Text histogram with one row per bin.
fn histogram_text(title: &str, values: &[f64], bin: f64, bins: usize) -> String {
    let mut counts = vec![0usize; bins];
    for v in values {
        counts[((v / bin).floor().max(0.0) as usize).min(bins - 1)] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0).max(1);
    let mut s = format!("{title}\n");
    for (i, c) in counts.iter().enumerate() {
        let lo = i as f64 * bin;
        let range = if i + 1 == bins { format!("{lo:>6.2} +     ") } else { format!("{lo:>6.2} - {:<5.2}", lo + bin) };
        let bar = "#".repeat((40 * c).div_ceil(top));
        let _ = writeln!(s, "  {range} {c:>8} {bar}");
    }
    s
}

pub fn world_report(world: &GroundTruthWorld) -> String {
    let e = world.extents();
    let mut s = String::new();
    let _ = writeln!(s, "resolution    {} m", world.resolution());
    let _ = writeln!(s, "dimensions    {:?} voxels", world.dims());
    let _ = writeln!(s, "extent        {:.1?} .. {:.1?}", e.min.to_array(), e.max.to_array());
    let _ = writeln!(s, "free volume   {:.1} m3 ({} voxels)", world.free_volume(), world.free_voxel_count());
    let _ = writeln!(s, "base station  {:.2?}", world.base_station().to_array());
    let _ = writeln!(s, "spawn points  {}", world.spawn_points().len());
    let widths = world.corridor_widths();
    s.push_str(&histogram_text("corridor width (m)", &widths, 0.5, 12));
    s
}

pub fn cmd_generate_world(seed: u64, params: &CaveParams, out: &Path) -> Result<String, CliError> {
    let world = generate_cave(seed, params).map_err(|e| match e {
        WorldError::Io(_) => runtime(e),
        _ => input(e),
    })?;
    save_world(&world, out).map_err(runtime)?;
    Ok(format!("wrote {}\n{}", out.display(), world_report(&world)))
}

/// Reads generation parameters from a TOML file, or the defaults.
pub fn load_cave_params(path: Option<&Path>) -> Result<CaveParams, CliError> {
    let Some(p) = path else { return Ok(CaveParams::default()) };
    let text = fs::read_to_string(p).map_err(|e| input(format!("{}: {e}", p.display())))?;
    toml::from_str(&text).map_err(|e| input(format!("{}: {e}", p.display())))
}

fn metrics_summary(m: &MissionMetrics) -> String {
    let g = &m.mission;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "mission {:.1} s, {} robots, explored {:.1} m3, relay chain {}, collisions {}",
        g.mission_time,
        g.robots,
        g.merged_explored_volume,
        if g.relay_connected { "connected" } else { "broken" },
        g.collisions
    );
    for r in &m.robot {
        let inc = r.exploration_time_increase.map(|v| format!(" ({v:+.1} %)")).unwrap_or_default();
        let _ = writeln!(
            s,
            "  robot {} {:<22} {:<7} exploration {:>7.1} s{inc}, flew {:.0} m",
            r.id, r.policy, r.final_mode.name(), r.exploration_time, r.trajectory_length
        );
    }
    s
}

/// Runs the mission to completion and writes its artifacts into `out_dir`.
/// A failing engine still leaves the artifacts gathered so far.
pub fn cmd_run(scenario: &Path, out_dir: &Path, seed: Option<u64>) -> Result<String, CliError> {
    let cfg = load_scenario(scenario, seed)?;
    let world = cfg.world.build(scenario_dir(scenario).as_deref(), cfg.robots)?;
    let run = |c: &MissionConfig| -> Result<MissionOutcome, CliError> {
        let mut engine = Engine::new(&world, c.clone())?;
        let res = engine.run_to_end();
        let out = MissionOutcome::from_engine(&engine);
        match res {
            Ok(()) => Ok(out),
            Err(e) => {
                out.write_artifacts(out_dir).map_err(runtime)?;
                Err(runtime(format!("mission failed at t = {:.2} s: {e}", engine.time())))
            }
        }
    };
    let mut out = run(&cfg)?;
    if cfg.compare_baseline && cfg.homing_mode == HomingMode::Relay {
        let baseline = run(&MissionConfig { homing_mode: HomingMode::ReturnToBase, ..cfg.clone() })?.metrics;
        out.metrics.attach_baseline(&baseline);
        out.baseline = Some(baseline);
    }
    out.write_artifacts(out_dir).map_err(runtime)?;
    let mut s = metrics_summary(&out.metrics);
    let _ = writeln!(s, "artifacts in {}", out_dir.display());
    if out.baseline.is_some() {
        let _ = writeln!(s, "baseline metrics in {BASELINE_METRICS_FILE}");
    }
    Ok(s)
}

pub fn cmd_homing_experiment(scenario: &Path, reps: usize, out_dir: &Path, seed: Option<u64>) -> Result<String, CliError> {
    let cfg = load_scenario(scenario, seed)?;
    let table = homing_experiment(&cfg, reps, scenario_dir(scenario).as_deref())?;
    let mut s = table.render();
    if reps < 2 {
        s.push_str("warning: a single repetition gives no average; the increases are one sample each\n");
    }
    fs::create_dir_all(out_dir).map_err(runtime)?;
    fs::write(out_dir.join(TABLE_FILE), &s).map_err(runtime)?;
    let mut csv = String::from("seed,rank,exploration_time,baseline_time\n");
    for (seed, rep) in &table.runs {
        for (k, (a, b)) in rep.relay.iter().zip(&rep.baseline).enumerate() {
            let _ = writeln!(csv, "{seed},{},{a},{b}", k + 1);
        }
    }
    fs::write(out_dir.join(EXPERIMENT_CSV), csv).map_err(runtime)?;
    Ok(s)
}

pub fn cmd_eval_map(map_path: &Path, world_path: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(map_path).map_err(|e| input(format!("{}: {e}", map_path.display())))?;
    let map = parse_map_ascii(&text).map_err(input)?;
    let world = load_world(world_path).map_err(input)?;
    let report = map_accuracy(&map, &world).map_err(|e| match e {
        MapError::EmptyReport => input("map has no occupied cells to evaluate"),
        e => input(e),
    })?;
    let mut s = String::new();
    let _ = writeln!(s, "points  {}", report.per_point_errors.len());
    let _ = writeln!(s, "mean    {:.4} m", report.mean);
    let _ = writeln!(s, "std     {:.4} m", report.std);
    let _ = writeln!(s, "max     {:.4} m", report.max());
    let bin = world.resolution() / 2.0;
    s.push_str(&histogram_text("error (m)", &report.per_point_errors, bin, 8));
    Ok(s)
}
