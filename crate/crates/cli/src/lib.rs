//! Command-line front end for `macrophase-core`: scenario files in, CSV and JSON out.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod sweep;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_falsify, cmd_run, Outcome, Status};
pub use config::{parse_config, FileConfig};
pub use error::{CliError, Result};
pub use sweep::{cmd_sweep, AxisSpec};

#[derive(Debug, Parser)]
#[command(name = "macrophase", version, about = "Relative-phase bounds for coupled pointer states")]
pub struct Cli {
    /// Worker threads for sweeps (default: one per core).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario file.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a scenario once per value of a numeric field.
    Sweep {
        config: PathBuf,
        /// FIELD:START:STOP:COUNT, e.g. coupling_length:5:50:10 or alpha2:0.05:0.95:19.
        #[arg(long)]
        axis: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Random-state stress tests and the bound-sign census.
    Falsify {
        #[arg(long, default_value_t = 10_000)]
        trials: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Run { config, out } => cmd_run(config, out),
        Command::Sweep { config, axis, out } => cmd_sweep(config, &axis.parse()?, out, cli.jobs),
        Command::Falsify { trials, seed, out } => cmd_falsify(*trials, *seed, out),
    }
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 ok, 2 bound violation or invariant breach, 1 error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            let m = &outcome.manifest;
            println!("{}: {} in {:.2}s, manifest {}", m.command, m.status, m.duration_seconds, outcome.manifest_path.display());
            if outcome.status != Status::Ok {
                let summary = serde_json::json!({ "status": m.status, "details": m.details });
                eprintln!("{summary}");
            }
            outcome.status.exit_code()
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            1
        }
    }
}
