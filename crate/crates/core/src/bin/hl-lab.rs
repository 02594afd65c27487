//! Batch front end: `hl-lab <scenario> --config run.toml --out dir`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error,
//! 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hl_core::{parse_config, run, Error, Scenario};

#[derive(Parser)]
#[command(name = "hl-lab", version, about = "Stress-diffusion model laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time integration with trace and profile snapshots.
    Evolve(Common),
    /// Stationary state for one shear rate.
    Steady(Common),
    /// Stationary (b, D, tau) table over a list of shear rates.
    Flowcurve(Common),
    /// Uniqueness verdict and escape profile for degenerate data.
    Degeneracy(Common),
    /// Vanishing-viscosity sweep.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Dotted key=value override, e.g. evolve.dt=5e-4 (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 1,
        Error::Grid(_) | Error::Config(_) | Error::InvalidInput(_) | Error::Cfl { .. } => 2,
        Error::Numerical(_) => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (scenario, args) = match cli.command {
        Command::Evolve(a) => (Scenario::Evolve, a),
        Command::Steady(a) => (Scenario::Steady, a),
        Command::Flowcurve(a) => (Scenario::Flowcurve, a),
        Command::Degeneracy(a) => (Scenario::Degeneracy, a),
        Command::Sweep(a) => (Scenario::Sweep, a),
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let config = match parse_config(&text, Some(scenario), &args.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}:", args.config.display());
            for line in e.to_string().lines() {
                eprintln!("  {line}");
            }
            return ExitCode::from(exit_code(&e));
        }
    };
    let base = args.config.parent().map(PathBuf::from).unwrap_or_default();
    match run(&config, &base, &args.out) {
        Ok(files) => {
            for f in files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {} scenario failed: {e}", scenario.as_str());
            ExitCode::from(exit_code(&e))
        }
    }
}
