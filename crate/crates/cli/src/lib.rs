//! Command-line driver for the recommender pipeline:
//! `synth`, `prepare`, `build-graph`, `train`, `evaluate`, `compare`.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

pub use config::{ModelKind, RunConfig};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "caasr", version, about = "Association-augmented sequential recommendation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every pipeline stage.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat key = value config file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Root seed for every random stream.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for all artifacts.
    #[arg(long, default_value = "out", value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter, sequence and split an interaction log.
    Prepare(Common),
    /// Build the item graph, Chebyshev terms and SPPMI from the train split.
    BuildGraph(Common),
    /// Train the configured model.
    Train(Common),
    /// Rank every test transition and write a report.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out-dir>/<model>.ckpt`.
        checkpoint: Option<PathBuf>,
    },
    /// Compare report B against report A; extra pairs are pooled.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
    },
    /// Generate a planted-structure interaction log.
    Synth(Common),
}

/// Resolves the effective config: defaults, then `--config`, then each
/// `--set`, then `--seed`.
pub fn resolve_config(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &common.set {
        cfg.apply_override(kv)?;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Runs one invocation and returns what should be printed on success.
pub fn run<I, T>(args: I) -> CliResult<String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => return Ok(e.to_string()),
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    let context = |common: &Common| -> CliResult<commands::Context> {
        Ok(commands::Context {
            cfg: resolve_config(common)?,
            out: common.out_dir.clone(),
        })
    };
    match &cli.command {
        Command::Prepare(c) => commands::prepare(&context(c)?),
        Command::BuildGraph(c) => commands::build_graph(&context(c)?),
        Command::Train(c) => commands::train(&context(c)?),
        Command::Evaluate { common, checkpoint } => commands::evaluate_cmd(&context(common)?, checkpoint.as_deref()),
        Command::Compare { reports } => commands::compare(reports),
        Command::Synth(c) => commands::synth(&context(c)?),
    }
}

/// Runs and maps the outcome to a process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match run(args) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
