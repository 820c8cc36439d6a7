//! Command-line experiment driver for `diracloc`.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use clap::{Parser, Subcommand};
use commands::CliError;
use config::{ConfigError, ExperimentConfig, Format};
use output::{Provenance, Writer};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "diracloc",
    version,
    about = "Localization experiments for the random discrete Dirac operator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the base seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Lyapunov exponent estimates against the closed form
    Lyapunov,
    /// Spectral-type map over (lambda, E) with critical energies
    PhaseDiagram,
    /// Fractional-moment, negative-moment and correlator decay fits
    GreenDecay,
    /// Wavepacket moments under horizon and box doubling
    Dynamics,
    /// Eigenvalues and eigenfunction decay profiles
    Eigen,
    /// Martingale decomposition, sandwich constants and growth probes
    Diagnostics,
    /// Empirical checks of the disorder assumptions
    ValidateDisorder,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Lyapunov => "lyapunov",
            Command::PhaseDiagram => "phase-diagram",
            Command::GreenDecay => "green-decay",
            Command::Dynamics => "dynamics",
            Command::Eigen => "eigen",
            Command::Diagnostics => "diagnostics",
            Command::ValidateDisorder => "validate-disorder",
        }
    }
}

/// Loads the config and applies command-line overrides.
pub fn load_config(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
                line: None,
                message: format!("cannot read {}: {e}", path.display()),
            })?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seeds.base = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one subcommand and returns the files written.
pub fn execute(command: Command, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let prov = Provenance {
        command: command.name(),
        config_hash: cfg.hash(),
        seed: cfg.seeds.base,
    };
    let mut out = Writer::new(&cfg.output.dir, prov)?;
    match command {
        Command::Lyapunov => commands::lyapunov(cfg, &mut out)?,
        Command::PhaseDiagram => commands::phase_diagram(cfg, &mut out)?,
        Command::GreenDecay => commands::green_decay(cfg, &mut out)?,
        Command::Dynamics => commands::dynamics(cfg, &mut out)?,
        Command::Eigen => commands::eigen(cfg, &mut out)?,
        Command::Diagnostics => commands::diagnostics(cfg, &mut out)?,
        Command::ValidateDisorder => commands::validate_disorder(cfg, &mut out)?,
    }
    Ok(out.into_written())
}

/// Full CLI entry point; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure {n} threads: {e}");
            return 2;
        }
    }
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match execute(cli.command, &cfg) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
