mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use config::RunConfig;
use error::{CliError, Result};
use output::OutDir;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Ground state by multi-start minimization on the Nehari manifold
    Ground,
    /// Minimization on the manifold given in [constraint]
    Minimize,
    /// Time evolution of the datum in [evolve]
    Evolve,
    /// Perturbation sweep around the family in [sweep]
    Sweep,
    /// Instability experiment for the family in [blowup]
    Blowup,
    /// Level identities for [params]
    Audit,
    /// Radial base profile on the configured grid
    Profile,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Ground => "ground",
            Self::Minimize => "minimize",
            Self::Evolve => "evolve",
            Self::Sweep => "sweep",
            Self::Blowup => "blowup",
            Self::Audit => "audit",
            Self::Profile => "profile",
        }
    }
}

/// Variational and dynamical experiments for two-component coupled NLS systems.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized starts, overriding `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, overriding `threads` (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    cfg.minimize.seed = cfg.seed;
    cfg.validate()?;
    cfg.grid.half_width = Some(cfg.grid()?.half_width());
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String> {
    let cfg = resolve(cli)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {} worker threads: {e}", cfg.threads)))?;
    }
    let out = OutDir::create(&cfg.output_dir)?;
    out.manifest(cli.command.name(), &cfg)?;
    match cli.command {
        Command::Ground => commands::ground(&cfg, &out),
        Command::Minimize => commands::minimize(&cfg, &out),
        Command::Evolve => commands::evolve(&cfg, &out),
        Command::Sweep => commands::sweep(&cfg, &out),
        Command::Blowup => commands::blowup(&cfg, &out),
        Command::Audit => commands::audit(&cfg, &out),
        Command::Profile => commands::profile(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
