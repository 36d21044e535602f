mod artifact;
mod commands;
mod config;

use bouncy::par::Execution;
use clap::{Parser, Subcommand};
use commands::{is_config_error, read_config, Ctx, Outcome};
use std::path::PathBuf;
use std::process::ExitCode;

/// Experiments for the Bouncy Particle Sampler.
#[derive(Debug, Parser)]
#[command(name = "bouncy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed; overrides the config's `seed` (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. 1 runs replicas in index order on the main thread.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the sampler and report time-averaged moments.
    Sample { config: PathBuf },
    /// Calibrate a Lyapunov function and check its drift on sampled points.
    DriftCheck { config: PathBuf },
    /// Coupled chains: empirical merge rate against the lower bound.
    Couple { config: PathBuf },
    /// Torus model: coupling TV bound and dimension scaling.
    Torus { config: PathBuf },
    /// Annealed sampler success probabilities over horizons.
    Anneal { config: PathBuf },
    /// Contraction check for a finite chain; the bundled chain without a config.
    Harris { config: Option<PathBuf> },
    /// Tabulate the merge-and-stay-bounded probability.
    AlphaTilde { config: PathBuf },
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    if cli.workers == 0 {
        return Err(commands::setup_fail("--workers must be at least 1".into()));
    }
    let exec = if cli.workers > 1 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global()?;
        Execution::Parallel
    } else {
        Execution::Sequential
    };
    let ctx = Ctx { seed_override: cli.seed, exec, out: cli.out.clone() };
    match &cli.command {
        Command::Sample { config } => commands::sample(&ctx, &read_config(config)?),
        Command::DriftCheck { config } => commands::drift_check(&ctx, &read_config(config)?),
        Command::Couple { config } => commands::couple(&ctx, &read_config(config)?),
        Command::Torus { config } => commands::torus(&ctx, &read_config(config)?),
        Command::Anneal { config } => commands::anneal(&ctx, &read_config(config)?),
        Command::Harris { config } => {
            let text = match config {
                Some(p) => read_config(p)?,
                None => String::new(),
            };
            commands::harris(&ctx, &text)
        }
        Command::AlphaTilde { config } => commands::alpha(&ctx, &read_config(config)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(o) if o.ok => {
            println!("{}", o.summary);
            ExitCode::SUCCESS
        }
        Ok(o) => {
            println!("{}", o.summary);
            if let Some(p) = o.report {
                eprintln!("check failed, see {}", p.display());
            }
            ExitCode::from(1)
        }
        Err(e) if is_config_error(&e) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("run failed: {e:#}");
            ExitCode::from(1)
        }
    }
}
