use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use magpack::experiments::{run, RunOptions};
use magpack::{selftest, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "magpack", version, about = "Gaussian wave packets in magnetic fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Directory for CSV output.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Worker threads for ε sweeps.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write 0 for runtimes so that repeated runs give identical files.
        #[arg(long)]
        no_timing: bool,
    },
    /// Moment oracles plus packet and field invariants.
    Selftest {
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            jobs,
            seed,
            no_timing,
        } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = ExperimentConfig::from_json(&text)?;
            let opts = RunOptions {
                jobs,
                seed,
                timing: !no_timing,
            };
            let outcome = run(&cfg, &opts)?;
            std::fs::create_dir_all(&out)?;
            let name = cfg
                .output
                .clone()
                .unwrap_or_else(|| format!("{}.csv", cfg.experiment.name()));
            let path = out.join(name);
            std::fs::write(&path, &outcome.csv)?;
            for c in &outcome.checks {
                println!("{}", c.line());
            }
            println!("wrote {}", path.display());
            Ok(outcome.passed())
        }
        Command::Selftest { seed } => {
            let checks = selftest::all_checks(seed.unwrap_or(selftest::DEFAULT_SEED))?;
            for c in &checks {
                println!("{}", c.line());
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}
