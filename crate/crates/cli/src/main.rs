use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use semidot_cli::commands::run_file;
use semidot_cli::Options;

#[derive(Debug, Parser)]
#[command(name = "semidot", version, about = "Semi-discrete optimal transport solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Treat condition, certificate and oracle failures as errors (exit 4).
    #[arg(long, global = true)]
    strict: bool,

    /// Skip the oracle comparison after solving.
    #[arg(long, global = true)]
    no_oracle: bool,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Seed for sampled checks; overrides `output.seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the scheme and write results, trace, raster and bound report.
    Solve { config: PathBuf },
    /// Run the cost condition checks.
    Verify { config: PathBuf },
    /// Compute the iteration-bound constants.
    Bounds { config: PathBuf },
    /// Solve and compare against the exact transport LP.
    Oracle { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = Options {
        strict: cli.strict,
        no_oracle: cli.no_oracle,
        out: cli.out,
        seed: cli.seed,
    };
    let (name, path) = match &cli.command {
        Command::Solve { config } => ("solve", config),
        Command::Verify { config } => ("verify", config),
        Command::Bounds { config } => ("bounds", config),
        Command::Oracle { config } => ("oracle", config),
    };
    match run_file(name, path, &opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
