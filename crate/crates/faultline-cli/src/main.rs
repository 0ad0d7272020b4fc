//! faultline: bit-flip resilience experiments from the command line.
//!
//! Subcommands: sweep, analyze, oracle, ablate, train, recovery. Each reads
//! a key-value config file (see `faultline::harness::config::KNOWN_KEYS`);
//! --out, --seed, --trials override the corresponding keys. Exit code is 0
//! only when all requested work completed; failures print one
//! machine-readable `ERROR <message>` line on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use faultline::harness::{self, ConfigFile};

#[derive(Parser)]
#[command(name = "faultline", version, about = "bit-flip fault injection laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Key-value config file; omit to run on defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (overrides the config's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base RNG seed (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials per point (overrides the config's `trials`).
    #[arg(long)]
    trials: Option<u32>,
    /// Worker threads for the rayon pool; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo BER sweep over one or more models.
    Sweep(CommonOpts),
    /// Closed-form per-layer error predictions, no sampling.
    Analyze(CommonOpts),
    /// Run every enumeration-vs-closed-form identity check.
    Oracle(CommonOpts),
    /// Train one model per grid point along an axis and sweep each.
    Ablate(CommonOpts),
    /// Train a model and report train/test accuracy.
    Train(CommonOpts),
    /// Depth-parity recovery sweep for LUT networks.
    Recovery(CommonOpts),
}

fn load_config(opts: &CommonOpts) -> Result<ConfigFile> {
    let mut cfg = match &opts.config {
        Some(path) => ConfigFile::from_path(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => ConfigFile::empty(),
    };
    if let Some(out) = &opts.out {
        cfg.set("output", out.display().to_string());
    }
    if let Some(seed) = opts.seed {
        cfg.set("seed", seed.to_string());
    }
    if let Some(trials) = opts.trials {
        cfg.set("trials", trials.to_string());
    }
    if let Some(threads) = opts.threads {
        // Build the global pool once; later calls would fail harmlessly.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Ok(cfg)
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    let (opts, runner): (&CommonOpts, fn(&ConfigFile) -> Result<(String, bool)>) =
        match &cli.command {
            Command::Sweep(opts) => (opts, |cfg| Ok((harness::cmd_sweep(cfg)?, true))),
            Command::Analyze(opts) => (opts, |cfg| Ok((harness::cmd_analyze(cfg)?, true))),
            Command::Oracle(opts) => (opts, |cfg| Ok(harness::cmd_oracle(cfg)?)),
            Command::Ablate(opts) => (opts, |cfg| Ok((harness::cmd_ablate(cfg)?, true))),
            Command::Train(opts) => (opts, |cfg| Ok((harness::cmd_train(cfg)?, true))),
            Command::Recovery(opts) => (opts, |cfg| Ok((harness::cmd_recovery(cfg)?, true))),
        };
    let cfg = load_config(opts)?;
    let (text, ok) = runner(&cfg)?;
    print!("{text}");
    Ok(ok)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("ERROR oracle checks failed");
            ExitCode::FAILURE
        }
        Err(err) => {
            eprintln!("ERROR {err:#}");
            ExitCode::FAILURE
        }
    }
}
