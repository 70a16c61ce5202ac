use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use choquard_cli::commands;
use choquard_cli::config::{RunConfig, Suite};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "choquard", version, about = "Normalized ground states of the mixed Choquard equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the normalized gradient flow and write report, history and field
    Solve(Common),
    /// Print critical exponents, regime label and coupling thresholds
    Classify(Common),
    /// Run the constant, oracle and identity checks
    Verify {
        #[command(flatten)]
        common: Common,
        /// Restrict to the one-dimensional oracle checks
        #[arg(long)]
        oracle_1d: bool,
        /// Perturb the Riesz multiplier used by the spectral path (fault injection)
        #[arg(long, hide = true)]
        corrupt_multiplier: bool,
    },
    /// Solve over the Cartesian product of the configured axes
    Sweep(Common),
    /// Compare spectral and direct-summation operators on a tiny grid
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Grid as N,L
    #[arg(long, value_name = "N,L")]
    grid: Option<String>,
    #[arg(long)]
    resolution_study: bool,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_path(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(g) = &self.grid {
            let Some((n, l)) = g.split_once(',') else {
                bail!("--grid expects N,L, got {g:?}");
            };
            cfg.grid.points = n.trim().parse()?;
            cfg.grid.length = l.trim().parse()?;
        }
        if self.resolution_study {
            cfg.solver.resolution_study = true;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Solve(c) => commands::run_solve(&c.load()?),
        Command::Classify(c) => commands::run_classify(&c.load()?),
        Command::Verify { common, oracle_1d, corrupt_multiplier } => {
            let mut cfg = common.load()?;
            if oracle_1d {
                cfg.verify.suite = Suite::Oracle1d;
            }
            cfg.verify.corrupt_multiplier |= corrupt_multiplier;
            commands::run_verify(&cfg)
        }
        Command::Sweep(c) => commands::run_sweep(&c.load()?),
        Command::Oracle(c) => commands::run_oracle(&c.load()?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::EXIT_ERROR as u8)
        }
    }
}
