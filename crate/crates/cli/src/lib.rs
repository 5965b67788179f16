//! Command-line driver: `synth`, `cluster`, `experiment`, `loop` and `report`.
//!
//! Exit codes: 0 success, 1 usage or configuration, 2 I/O, 3 parse,
//! 4 calibration failure, 5 missing input.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "acflab",
    version,
    about = "Facet x representation experiments: simulate, analyze, cluster and recommend"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// `KEY=VALUE` override with a dotted key, e.g. `loop.steps=8`. Repeatable.
    #[arg(long = "set", global = true, value_name = "K=V")]
    pub set: Vec<String>,

    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a labeled synthetic dataset.
    Synth,
    /// Fit mixtures by BIC and score the clusters against the labels.
    Cluster {
        /// Dataset to read instead of `<out>/dataset.csv`.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Calibrate trading agents and run the between-subjects experiment.
    Experiment,
    /// Run the adaptive representation recommender.
    Loop,
    /// Assemble report.md from earlier outputs.
    Report,
}

fn execute(cli: Cli) -> CliResult<String> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.set)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    match &cli.command {
        Command::Synth => commands::synth(&cfg, &out),
        Command::Cluster { dataset } => commands::cluster(&cfg, &out, dataset.as_deref()),
        Command::Experiment => commands::experiment(&cfg, &out),
        Command::Loop => commands::adaptive_loop(&cfg, &out),
        Command::Report => report::report(&out),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
