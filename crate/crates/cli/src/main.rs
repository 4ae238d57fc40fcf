//! `prgcn`: train, evaluate and inspect skeleton action-recognition models.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prgcn_core::Error;

#[derive(Debug, Parser)]
#[command(name = "prgcn", version, about = "Skeleton-based action recognition with pose refinement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Args, Clone)]
struct Common {
    /// `key = value` configuration file (`model.` / `train.` prefixes allowed).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for model initialization, shuffling, augmentation and synthesis.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Configuration override, applied after the file and --seed. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on a manifest; writes model.ckpt and metrics.jsonl under --out.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Top-1, top-5 and loss of a checkpoint over a labelled manifest.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Five most probable classes for one clip.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Clip file.
        clip: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Writes a clip's refined poses in the clip file format.
    Refine {
        /// Model to use; a freshly initialized model from the configuration
        /// when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Clip file.
        clip: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Parameter and FLOP counts per block.
    Count {
        #[command(flatten)]
        common: Common,
    },
    /// Writes a synthetic dataset (clips plus manifest.txt) to --out.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 10)]
        per_class: usize,
        #[arg(long, default_value_t = 5)]
        joints: usize,
        #[arg(long, default_value_t = 48)]
        frames: usize,
        /// Standard deviation of the coordinate noise.
        #[arg(long)]
        noise: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NonFinite { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
