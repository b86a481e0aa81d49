//! `mesorisk`: spectrum, community detection, stability, factor calibration
//! and portfolio default-risk simulation from a spread panel.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mesorisk::{Error, Result};

use crate::commands::SynthArgs;
use crate::config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "mesorisk", version, about)]
struct Cli {
    /// TOML file of run settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, default `out`
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Repeat for more log output on stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a planted-group spread panel and metadata.
    Synth(SynthArgs),
    /// Eigenvalue spectrum, noise bounds and shuffle test.
    Spectrum(Overrides),
    /// Communities and their hierarchy.
    Detect(Overrides),
    /// Partition stability across resolutions and sliding windows.
    Stability(Overrides),
    /// Factor construction and model calibration.
    Calibrate(Overrides),
    /// Portfolio loss quantiles under calibrated models.
    Simulate(Overrides),
    /// All stages in one output directory.
    Pipeline(Overrides),
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
    }
    let resolve =
        |o: &Overrides| RunConfig::resolve(cli.config.as_deref(), cli.seed, cli.out_dir.clone(), o);
    match &cli.command {
        Command::Synth(a) => {
            let base = resolve(&Overrides::default())?;
            commands::synth(base.seed, base.out_dir, a)
        }
        Command::Spectrum(o) => commands::spectrum(&resolve(o)?),
        Command::Detect(o) => commands::detect_cmd(&resolve(o)?).map(|_| ()),
        Command::Stability(o) => commands::stability(&resolve(o)?),
        Command::Calibrate(o) => commands::calibrate_cmd(&resolve(o)?).map(|_| ()),
        Command::Simulate(o) => commands::simulate_cmd(&resolve(o)?),
        Command::Pipeline(o) => commands::pipeline(&resolve(o)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("MESORISK_LOG")
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
