//! Command-line front end: `varcons <subcommand> --config <path> [--section.key value ...]`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure or a
//! failed check.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{CheckReport, CliError, SolveArtifacts};
pub use config::{load_config, ConfigError, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "varcons", version, about = "Error-functional descent for 1-D conservation laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides as `--section.key value` or `--section.key=value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, num_args = 0..)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Descent run with fields, history, heatmap and summary.
    Solve(Common),
    /// Directional derivative against central differences.
    GradientCheck(Common),
    /// Iterative and banded defect solves against a dense LU.
    OracleCheck(Common),
    /// Commutation of flux Jacobians.
    CommutationCheck(Common),
    /// Viscous solutions over a list of epsilons.
    EntropySweep(Common),
    /// Energy of the interpolated exact solution under refinement.
    MeshSweep(Common),
    /// Young-measure diagnostics of a descent run.
    YmReport(Common),
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("varcons: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let (common, which) = match command {
        Command::Solve(c) => (c, "solve"),
        Command::GradientCheck(c) => (c, "gradient-check"),
        Command::OracleCheck(c) => (c, "oracle-check"),
        Command::CommutationCheck(c) => (c, "commutation-check"),
        Command::EntropySweep(c) => (c, "entropy-sweep"),
        Command::MeshSweep(c) => (c, "mesh-sweep"),
        Command::YmReport(c) => (c, "ym-report"),
    };
    commands::thread_count()?;
    let config = load_config(&common.config, &common.overrides)?;
    match which {
        "solve" => {
            let artifacts = commands::run_solve(&config)?;
            print!("{}", std::fs::read_to_string(artifacts.dir.join("run_summary.txt"))?);
            Ok(())
        }
        "gradient-check" => commands::print_report(&commands::gradient_check(&config)?),
        "oracle-check" => commands::print_report(&commands::oracle_check(&config)?),
        "commutation-check" => commands::print_report(&commands::commutation_check(&config)?),
        "entropy-sweep" => {
            let (_, report) = commands::entropy_sweep(&config)?;
            commands::print_report(&report)
        }
        "mesh-sweep" => {
            let (_, report) = commands::mesh_sweep(&config)?;
            commands::print_report(&report)
        }
        _ => {
            print!("{}", commands::ym_report(&config)?);
            Ok(())
        }
    }
}
