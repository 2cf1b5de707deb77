//! `vmf-contrast`: landscape sweeps, training runs and numerical checks.
//!
//! Every run writes its primary output to `--out` and a manifest with the
//! seed and resolved configuration to `<out>.manifest.toml`; passing that
//! manifest back as `--config` replays the run.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vmf_contrast::contrastive::SimilarityKind;

use commands::RunOptions;

#[derive(Debug, Parser)]
#[command(name = "vmf-contrast", version, about = "vMF mutual likelihood scores: sweeps, training and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration, or a manifest from an earlier run
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Primary output file
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Random seed [default: 7]
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Override one configuration key; dotted keys reach nested tables
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl From<Common> for RunOptions {
    fn from(c: Common) -> Self {
        Self { config: c.config, out: c.out, seed: c.seed, sets: c.sets }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score landscape over (kappa_i, kappa_j, cos_theta) as CSV [out: landscape.csv]
    Sweep(Common),
    /// Train the toy encoder and write its diagnostics history [out: history.csv]
    Train {
        #[command(flatten)]
        common: Common,
        /// Similarity inside the contrastive loss: mls or inner
        #[arg(long)]
        similarity: Option<SimilarityKind>,
    },
    /// Run the oracle and gradient suites [out: check.csv]
    Check(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(c) => commands::sweep(&c.into()),
        Command::Train { common, similarity } => commands::train(&common.into(), similarity),
        Command::Check(c) => commands::check(&c.into()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}
