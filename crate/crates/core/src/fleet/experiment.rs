use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path as FsPath;

use super::{run_mission, FleetError, HomingMode, MissionConfig, MissionMetrics, WorldSpec};

/// Exploration times of one repetition, per robot rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Repetition {
    pub relay: Vec<f64>,
    pub baseline: Vec<f64>,
    pub collisions: usize,
}

impl Repetition {
    pub fn from_metrics(relay: &MissionMetrics, baseline: &MissionMetrics) -> Self {
        Self {
            relay: relay.robot.iter().map(|r| r.exploration_time).collect(),
            baseline: baseline.robot.iter().map(|r| r.exploration_time).collect(),
            collisions: relay.mission.collisions + baseline.mission.collisions,
        }
    }
}

/// Relay homing against return-to-base, aggregated over seeds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentTable {
    pub runs: BTreeMap<u64, Repetition>,
}

impl ExperimentTable {
    pub fn robots(&self) -> usize {
        self.runs.values().map(|r| r.relay.len()).min().unwrap_or(0)
    }

    pub fn repetitions(&self) -> usize {
        self.runs.len()
    }

    fn mean(&self, rank: usize, pick: impl Fn(&Repetition) -> &[f64]) -> f64 {
        let n = self.runs.len().max(1) as f64;
        self.runs.values().map(|r| pick(r)[rank]).sum::<f64>() / n
    }

    pub fn mean_exploration_time(&self, rank: usize) -> f64 {
        self.mean(rank, |r| &r.relay)
    }

    pub fn mean_baseline_time(&self, rank: usize) -> f64 {
        self.mean(rank, |r| &r.baseline)
    }

    /// Baseline exploration time averaged over every flight.
    pub fn baseline_mean(&self) -> f64 {
        let n = self.robots();
        (0..n).map(|k| self.mean_baseline_time(k)).sum::<f64>() / n.max(1) as f64
    }

    /// Percent increase of the mean relay exploration time over the mean
    /// baseline time of the same rank.
    pub fn mean_increase(&self, rank: usize) -> f64 {
        let b = self.mean_baseline_time(rank);
        100.0 * (self.mean_exploration_time(rank) - b) / b
    }

    pub fn increases(&self) -> Vec<f64> {
        (0..self.robots()).map(|k| self.mean_increase(k)).collect()
    }

    pub fn collisions(&self) -> usize {
        self.runs.values().map(|r| r.collisions).sum()
    }

    /// Increase is non-decreasing in rank, allowing at most one drop of no
    /// more than `tolerance` percentage points.
    pub fn trend_holds(&self, tolerance: f64) -> bool {
        let inc = self.increases();
        let drops: Vec<f64> = inc.windows(2).filter(|w| w[1] < w[0]).map(|w| w[0] - w[1]).collect();
        drops.is_empty() || (drops.len() == 1 && drops[0] <= tolerance)
    }

    pub fn render(&self) -> String {
        let n = self.robots();
        let mut s = String::new();
        let _ = write!(s, "{:<40}", "Robot");
        for k in 1..=n {
            let _ = write!(s, "{:>10}", ordinal(k));
        }
        let _ = write!(s, "\n{:<40}", "Exploration time before homing (secs)");
        for k in 0..n {
            let _ = write!(s, "{:>10.0}", self.mean_exploration_time(k));
        }
        let _ = write!(s, "\n{:<40}", "Exploration time increase (%)");
        for k in 0..n {
            let _ = write!(s, "{:>10.1}", self.mean_increase(k));
        }
        let _ = writeln!(
            s,
            "\nbaseline {:.0} s averaged over {} return-to-base flights, {} repetitions (seeds {})",
            self.baseline_mean(),
            n * self.repetitions(),
            self.repetitions(),
            self.runs.keys().map(|k| k.to_string()).collect::<Vec<_>>().join(", ")
        );
        s
    }
}

fn ordinal(k: usize) -> String {
    let suffix = match (k % 10, k % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{k}{suffix}")
}

/// Scenario for repetition `rep`: the mission seed and, for generated
/// worlds, the world seed are offset by `rep`.
pub fn repetition_config(config: &MissionConfig, rep: u64) -> MissionConfig {
    let mut c = config.clone();
    c.seed = config.seed.wrapping_add(rep);
    if let WorldSpec::Generated { seed, .. } = &mut c.world {
        *seed = seed.wrapping_add(rep);
    }
    c.homing_mode = HomingMode::Relay;
    c.compare_baseline = true;
    c
}

/// Runs `repetitions` relay missions, each against its return-to-base
/// baseline.
pub fn homing_experiment(
    config: &MissionConfig,
    repetitions: usize,
    base_dir: Option<&FsPath>,
) -> Result<ExperimentTable, FleetError> {
    if config.robots < 2 {
        return Err(FleetError::Config("homing experiment needs at least 2 robots".into()));
    }
    if repetitions == 0 {
        return Err(FleetError::Config("at least one repetition required".into()));
    }
    let mut table = ExperimentTable::default();
    for rep in 0..repetitions as u64 {
        let c = repetition_config(config, rep);
        let out = run_mission(&c, base_dir)?;
        let baseline = out.baseline.as_ref().expect("relay run with compare_baseline has a baseline");
        table.runs.insert(c.seed, Repetition::from_metrics(&out.metrics, baseline));
    }
    Ok(table)
}
