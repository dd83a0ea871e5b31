use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use hovi_cli::{execute, Invocation, Mode};

/// Benchmark harness for higher-order variational-inequality solvers.
#[derive(Parser)]
#[command(name = "hovi", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `outputs.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override applied to solver and verifier sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress informational stdout lines.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver; write a trace CSV and a JSON summary.
    Run(CommonArgs),
    /// Run one solver per value of a swept parameter.
    Sweep(CommonArgs),
    /// Estimate an operator condition and compare against theorem ranges.
    Verify(CommonArgs),
    /// Integrate the rescaled continuous-time dynamics.
    Continuous(CommonArgs),
    /// Run several solvers from the same start and tabulate best norms.
    Compare(CommonArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version print to stdout and succeed; anything else is
            // an argument error (exit 1; 2 is reserved for numerical failure).
            let is_help =
                matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    let (mode, args) = match cli.command {
        Command::Run(a) => (Mode::Run, a),
        Command::Sweep(a) => (Mode::Sweep, a),
        Command::Verify(a) => (Mode::Verify, a),
        Command::Continuous(a) => (Mode::Continuous, a),
        Command::Compare(a) => (Mode::Compare, a),
    };
    let inv = Invocation {
        config_path: args.config,
        out_dir: args.out,
        seed_override: args.seed,
        quiet: args.quiet,
    };
    ExitCode::from(execute(mode, &inv) as u8)
}
