use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use compsched::commands::{execute, Command};
use compsched::config::ExperimentConfig;

/// Coordinated multi-cell user scheduling experiments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Density of the squared cosine between two users' channels.
    AnglePdf(Common),
    /// Gap between the projected norm and its lower bounds along the two-cell line.
    Tightness(Common),
    /// Throughput against the orthogonality threshold.
    Sweep(Common),
    /// Per-user throughput of every scheduler on the same drops.
    Campaign(Common),
    /// Throughput at zero speed and at the configured speed.
    Delay(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply to missing keys, or to everything when omitted.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed; all random streams derive from it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::AnglePdf(a) => (Command::AnglePdf, a),
        Sub::Tightness(a) => (Command::Tightness, a),
        Sub::Sweep(a) => (Command::Sweep, a),
        Sub::Campaign(a) => (Command::Campaign, a),
        Sub::Delay(a) => (Command::Delay, a),
    };
    let run = || -> compsched::Result<PathBuf> {
        let config = match &args.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        execute(command, &config, args.seed, &args.out)
    };
    match run() {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
