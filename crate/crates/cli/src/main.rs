//! `ssrbm`: train, sample from and score semi-supervised RBMs.
//!
//! Every command writes `<command>.manifest.json` into the output
//! directory; `ssrbm replay <manifest>` runs the same command again.

mod commands;
mod data_io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use commands::evaluate::EvaluateArgs;
use commands::generate::GenerateArgs;
use commands::predict::PredictArgs;
use commands::project::ProjectArgs;
use commands::split::SplitArgs;
use commands::train::TrainArgs;
use commands::Context;
use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "ssrbm", version, about = "Semi-supervised RBMs: training, conditional generation, label prediction and scoring")]
struct Cli {
    /// Worker threads for chain-parallel work [default: all cores].
    #[arg(long, env = "SSRBM_THREADS", global = true)]
    threads: Option<usize>,
    /// Directory for every file a command writes.
    #[arg(long, env = "SSRBM_OUT_DIR", global = true, default_value = ".")]
    out_dir: PathBuf,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model; writes checkpoints, train_log.tsv and a manifest.
    Train(TrainArgs),
    /// Sample label-conditioned data from a checkpoint.
    Generate(GenerateArgs),
    /// Predict labels; with labeled input also writes a confusion matrix.
    Predict(PredictArgs),
    /// Score generated data against a reference along a generation-time grid.
    Evaluate(EvaluateArgs),
    /// Project data onto the reference set's top two principal components.
    Project(ProjectArgs),
    /// Stratified train/test split.
    Split(SplitArgs),
    /// Run the command recorded in a manifest again.
    Replay {
        manifest: PathBuf,
    },
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn args_from<A: DeserializeOwned>(manifest: &RunManifest) -> Result<A> {
    serde_json::from_value(manifest.args.clone())
        .with_context(|| format!("manifest arguments do not fit the `{}` command", manifest.command))
}

fn dispatch(command: Command, out_dir: PathBuf, threads: Option<usize>) -> Result<()> {
    match command {
        Command::Replay { manifest } => {
            let m = RunManifest::load(&manifest)?;
            if m.version != env!("CARGO_PKG_VERSION") {
                log::warn!("manifest written by version {}, replaying with {}", m.version, env!("CARGO_PKG_VERSION"));
            }
            init_threads(threads.or(Some(m.threads)))?;
            let ctx = Context::new(out_dir)?;
            log::info!("replaying `{}` into {}", m.command, ctx.out_dir.display());
            match m.command.as_str() {
                "train" => commands::train::run(&args_from(&m)?, &ctx),
                "generate" => commands::generate::run(&args_from(&m)?, &ctx),
                "predict" => commands::predict::run(&args_from(&m)?, &ctx),
                "evaluate" => commands::evaluate::run(&args_from(&m)?, &ctx),
                "project" => commands::project::run(&args_from(&m)?, &ctx),
                "split" => commands::split::run(&args_from(&m)?, &ctx),
                other => anyhow::bail!("manifest names an unknown command `{other}`"),
            }
        }
        command => {
            init_threads(threads)?;
            let ctx = Context::new(out_dir)?;
            match command {
                Command::Train(a) => commands::train::run(&a, &ctx),
                Command::Generate(a) => commands::generate::run(&a, &ctx),
                Command::Predict(a) => commands::predict::run(&a, &ctx),
                Command::Evaluate(a) => commands::evaluate::run(&a, &ctx),
                Command::Project(a) => commands::project::run(&a, &ctx),
                Command::Split(a) => commands::split::run(&a, &ctx),
                Command::Replay { .. } => unreachable!("handled above"),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose, cli.quiet);
    match dispatch(cli.command, cli.out_dir, cli.threads) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
