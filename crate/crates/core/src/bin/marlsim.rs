//! Command-line front end: run experiments, aggregate metrics, solve games
//! exactly, and validate configs.
//!
//! Exit codes: 0 success, 2 invalid config/arguments, 3 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use marlsim::harness::{run_experiment, summarize, ExperimentConfig, HarnessError};
use marlsim::oracle::joint_value_iteration;
use marlsim::Game;

#[derive(Parser)]
#[command(name = "marlsim", about = "Deterministic tabular multi-agent RL simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file and write metrics CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the number of runs.
        #[arg(long)]
        runs: Option<usize>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: current directory).
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Aggregate metrics CSVs in a directory into summary.csv.
    Summarize {
        #[arg(long = "in")]
        in_dir: PathBuf,
        /// Also write a line plot (summary.svg).
        #[arg(long)]
        plot: bool,
    },
    /// Exactly solve a game file and print its optimal values.
    Solve {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, default_value_t = 0.95)]
        gamma: f64,
    },
    /// Check a config file and report all problems.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_text(&text)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate { config, runs, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(runs) = runs {
                cfg.num_runs = runs;
            }
            if let Some(seed) = seed {
                cfg.base_seed = seed;
            }
            cfg.validate()?;
            let (path, outcomes) = run_experiment(&cfg, &out)?;
            let finals: Vec<f64> = outcomes
                .iter()
                .filter_map(|o| o.rows.last().map(|r| r.eval_return))
                .collect();
            let mean = if finals.is_empty() {
                f64::NAN
            } else {
                finals.iter().sum::<f64>() / finals.len() as f64
            };
            println!("wrote {} ({} runs, final mean return {mean})", path.display(), cfg.num_runs);
            Ok(())
        }
        Command::Summarize { in_dir, plot } => {
            let out = summarize(&in_dir, plot)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Solve { game, gamma } => {
            if !(0.0..=1.0).contains(&gamma) {
                return Err(HarnessError::Config(vec![format!(
                    "gamma: must be in [0, 1], got {gamma}"
                )]));
            }
            let game = Game::load(&game)
                .map_err(|e| HarnessError::Config(vec![format!("game file: {e}")]))?;
            let solution = joint_value_iteration(&game, gamma, 1e-9)
                .map_err(|e| HarnessError::Runtime(e.to_string()))?;
            print!("{}", solution.dump(&game));
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            cfg.game.build()?;
            cfg.schedule(cfg.game.build()?.num_agents())?;
            println!("config ok: {}", cfg.name);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ HarnessError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
