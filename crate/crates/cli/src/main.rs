//! `gnssbench`: align an evaluated receiver to a reference INS and report
//! accuracy, availability, continuity and map layers.

mod commands;
mod config;
mod error;
mod output;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::report::ReportOptions;
use commands::selftest::SelftestOptions;
use config::{Flags, RunConfig};
use error::CliError;
use pipeline::Source;

#[derive(Parser)]
#[command(name = "gnssbench", version, about = "GNSS receiver evaluation against a reference INS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the frame rotation, lever arm and global offset.
    Align {
        #[command(flatten)]
        flags: Flags,
    },
    /// Accuracy, service-level, visibility and mode tables.
    Report {
        #[command(flatten)]
        flags: Flags,
        /// alignment.json written by `align`.
        #[arg(long, value_name = "JSON")]
        alignment: Option<PathBuf>,
        /// Take the rotation as identity and solve only the lever arm
        /// (requires --model translation-only).
        #[arg(long)]
        assume_identity: bool,
        /// Also tabulate signed error components.
        #[arg(long)]
        signed: bool,
    },
    /// Continuity-loss grids and outage statistics for one stream.
    Continuity {
        #[command(flatten)]
        flags: Flags,
        /// Stream to analyse; defaults to the reference when given.
        #[arg(long, value_enum)]
        source: Option<Source>,
    },
    /// Gridded performance map as GeoJSON.
    Map {
        #[command(flatten)]
        flags: Flags,
        #[arg(long, value_enum)]
        source: Option<Source>,
        /// Attach aligned lateral errors to the mapped epochs.
        #[arg(long, value_name = "JSON")]
        alignment: Option<PathBuf>,
    },
    /// Generate a fixture with known parameters and check recovery.
    Selftest {
        #[command(flatten)]
        flags: Flags,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Reference position noise, meters (1σ per axis).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Drive straight at fixed attitude; the full model must then
        /// report a rank deficiency.
        #[arg(long)]
        constant_heading: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Align { flags } => commands::align::run(&RunConfig::resolve(&flags)?),
        Command::Report {
            flags,
            alignment,
            assume_identity,
            signed,
        } => commands::report::run(
            &RunConfig::resolve(&flags)?,
            &ReportOptions {
                alignment: alignment.as_deref(),
                assume_identity,
                signed,
            },
        ),
        Command::Continuity { flags, source } => commands::continuity::run(&RunConfig::resolve(&flags)?, source),
        Command::Map {
            flags,
            source,
            alignment,
        } => commands::map::run(&RunConfig::resolve(&flags)?, source, alignment.as_deref()),
        Command::Selftest {
            flags,
            seed,
            n,
            noise,
            constant_heading,
        } => commands::selftest::run(
            &RunConfig::resolve(&flags)?,
            &SelftestOptions {
                seed,
                n,
                noise,
                constant_heading,
            },
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GNSSBENCH_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
