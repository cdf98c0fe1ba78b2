use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use targeting::report::{cmd_alpha, cmd_curve, cmd_sweep, cmd_synth, with_threads, RunConfig};

/// Compare risk-based, effect-based and random targeting of a scarce intervention.
#[derive(Debug, Parser)]
#[command(name = "targeting", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic trial and its ground-truth potential outcomes.
    Synth(Common),
    /// Smoothed treatment effect against baseline risk.
    Curve(Common),
    /// Policy values across confounding levels, per welfare function.
    Sweep(Common),
    /// Smallest welfare weight at which risk targeting is competitive, per confounding level.
    Alpha(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; a default synthetic run when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

type CommandFn = fn(&RunConfig) -> targeting::Result<Vec<PathBuf>>;

fn run(cli: Cli) -> anyhow::Result<Vec<PathBuf>> {
    let (common, cmd): (&Common, CommandFn) = match &cli.command {
        Command::Synth(c) => (c, cmd_synth),
        Command::Curve(c) => (c, cmd_curve),
        Command::Sweep(c) => (c, cmd_sweep),
        Command::Alpha(c) => (c, cmd_alpha),
    };
    let cfg = common.resolve()?;
    Ok(with_threads(common.threads, || cmd(&cfg))?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
