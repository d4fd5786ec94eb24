use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use orbitstream_cli::commands::{self, AblateArgs, SimulateArgs};

#[derive(Parser)]
#[command(
    name = "orbitstream",
    version,
    about = "Deterministic Monte Carlo harness for tile-based 360 streaming"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write the report bundle.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated algorithm subset (kebab-case names).
        #[arg(long, value_delimiter = ',')]
        algos: Option<Vec<String>>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; the flag wins over ORBITSTREAM_WORKERS.
        #[arg(long, env = "ORBITSTREAM_WORKERS")]
        workers: Option<usize>,
    },
    /// Run a matched-seed ablation pair and write paired deltas.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        /// One of: flat-mass, beta-sweep, delta-zero, dropout.
        #[arg(long)]
        variant: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "ORBITSTREAM_WORKERS")]
        workers: Option<usize>,
    },
    /// Write the bundled capacity traces as CSV files.
    GenTraces {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config file without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out, algos, runs, seed, workers } => {
            commands::simulate(SimulateArgs {
                config: &config,
                out: &out,
                algos,
                runs,
                seed,
                workers,
            })
        }
        Command::Ablate { config, variant, out, runs, seed, workers } => {
            commands::ablate(AblateArgs {
                config: &config,
                variant: &variant,
                out: &out,
                runs,
                seed,
                workers,
            })
        }
        Command::GenTraces { out, seed } => commands::gen_traces(&out, seed).map(|()| 0),
        Command::Validate { config } => commands::validate(&config).map(|()| 0),
    };
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
