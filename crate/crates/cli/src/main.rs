use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linpoly::config::parse_config;
use linpoly::run::{run, Command};

/// Dislocation self-energies, relaxed densities, polycrystal minimisers and
/// semi-discrete recovery tables.
///
/// Worker threads: LINPOLY_THREADS, else TOOL_THREADS, else all cores.
#[derive(Parser)]
#[command(name = "linpoly", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Self-energy per core radius, hard-core values and the limit.
    Selfenergy(RunArgs),
    /// Relaxed density: hull vertices and gnuplot polygon.
    Density(RunArgs),
    /// Polycrystal minimiser for the boundary datum.
    Minimize(RunArgs),
    /// One recovery configuration with its energy and circulation checks.
    Recover(RunArgs),
    /// Recovery energy against the limit along the core-radius sweep.
    GammaTable(RunArgs),
    /// Validate a config and print its effective canonical form.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn thread_count() -> Result<Option<usize>, String> {
    for var in ["LINPOLY_THREADS", "TOOL_THREADS"] {
        if let Ok(v) = std::env::var(var) {
            return match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(Some(n)),
                _ => Err(format!("{var} must be a positive integer, got {v:?}")),
            };
        }
    }
    Ok(None)
}

fn load(path: &PathBuf) -> Result<linpoly::config::RunConfig, (u8, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| (2, format!("reading {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| (2, format!("invalid config {}:\n{e}", path.display())))
}

fn main_inner(cli: Cli) -> Result<(), (u8, String)> {
    let threads = thread_count().map_err(|e| (2, e))?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| (1, e.to_string()))?;
    }
    let (command, args) = match cli.command {
        Cmd::Check { config } => {
            print!("{}", load(&config)?.to_canonical());
            return Ok(());
        }
        Cmd::Selfenergy(a) => (Command::SelfEnergy, a),
        Cmd::Density(a) => (Command::Density, a),
        Cmd::Minimize(a) => (Command::Minimize, a),
        Cmd::Recover(a) => (Command::Recover, a),
        Cmd::GammaTable(a) => (Command::GammaTable, a),
    };
    let cfg = load(&args.config)?;
    let written = run(command, &cfg, &args.out).map_err(|e| (1, e.to_string()))?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("linpoly: {msg}");
            ExitCode::from(code)
        }
    }
}
