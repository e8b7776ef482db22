use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cavenav::cli::{self, CliError};

/// Multi-robot cave exploration simulator.
#[derive(Parser)]
#[command(name = "cavenav", version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a cave world file and print its statistics.
    GenerateWorld {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// TOML file with cave generation parameters.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a mission scenario and write its artifacts.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare relay homing with return-to-base over several seeds.
    HomingExperiment {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = cli::DEFAULT_REPS)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
        /// First seed; repetitions count up from it.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Point-to-point error of an exported map against its world.
    EvalMap {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        world: PathBuf,
    },
}

fn run(args: Args) -> Result<String, CliError> {
    match args.command {
        Command::GenerateWorld { seed, params, out } => {
            let p = cli::load_cave_params(params.as_deref())?;
            cli::cmd_generate_world(seed, &p, &out)
        }
        Command::Run { scenario, out, seed } => cli::cmd_run(&scenario, &out, seed),
        Command::HomingExperiment { scenario, reps, out, seed } => cli::cmd_homing_experiment(&scenario, reps, &out, seed),
        Command::EvalMap { map, world } => cli::cmd_eval_map(&map, &world),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("CAVENAV_LOG", "warn")).init();
    match run(Args::parse()) {
        Ok(s) => {
            print!("{s}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
