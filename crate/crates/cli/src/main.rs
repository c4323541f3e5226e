//! `flatbill`: reproducible experiment runner for billiards with flat points.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure,
//! 3 acceptance failure (`verify` only).

mod artifact;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Command, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "flatbill", version = artifact::VERSION, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Build the table and report junction angles and curvature.
    Table,
    /// Dump a trajectory from a μ-sampled starting point.
    Orbit,
    /// Trace a corridor orbit launched just above the separatrix.
    Corridor,
    /// Locate singularity cells along a scan line and fit their heights.
    Cells,
    /// Monte Carlo return-time histogram and survival tail fit.
    ReturnTail,
    /// Expansion factors per cell, split ratio and expansion sum.
    Expansion,
    /// Time correlations of two observables along long orbits.
    Correlations,
    /// Run the acceptance suite at the given β.
    Verify,
}

/// Every flag overrides the key of the same name (dashes become
/// underscores) from `--config`.
#[derive(Args, Debug, Default)]
struct Flags {
    /// Config file of `key = value` lines; `#` starts a comment.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    beta: Option<String>,
    /// Half-width of the window around the flat points.
    #[arg(long, global = true)]
    epsilon: Option<String>,
    #[arg(long, global = true)]
    half_width: Option<String>,
    #[arg(long, global = true)]
    closure_slack: Option<String>,
    /// full or half.
    #[arg(long, global = true)]
    variant: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    samples: Option<String>,
    #[arg(long, global = true)]
    orbit_length: Option<String>,
    /// Step limit for a single excursion.
    #[arg(long, global = true)]
    n_max: Option<String>,
    /// Boundary coordinate of the cell scan line.
    #[arg(long, global = true)]
    r0: Option<String>,
    #[arg(long, global = true)]
    cell_limit: Option<String>,
    #[arg(long, global = true)]
    max_lag: Option<String>,
    /// free_path, cos_phi, window_indicator or x_coordinate.
    #[arg(long, global = true)]
    observable_f: Option<String>,
    #[arg(long, global = true)]
    observable_g: Option<String>,
    #[arg(long, global = true)]
    corridor_x0: Option<String>,
    #[arg(long, global = true)]
    corridor_offset: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<String>,
    /// Directory that receives `<command>.csv` and `<command>.json`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<String>,
    /// Format printed on stdout: csv or json.
    #[arg(long, global = true)]
    format: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        [
            ("beta", &self.beta),
            ("epsilon", &self.epsilon),
            ("half_width", &self.half_width),
            ("closure_slack", &self.closure_slack),
            ("variant", &self.variant),
            ("seed", &self.seed),
            ("samples", &self.samples),
            ("orbit_length", &self.orbit_length),
            ("n_max", &self.n_max),
            ("r0", &self.r0),
            ("cell_limit", &self.cell_limit),
            ("max_lag", &self.max_lag),
            ("observable_f", &self.observable_f),
            ("observable_g", &self.observable_g),
            ("corridor_x0", &self.corridor_x0),
            ("corridor_offset", &self.corridor_offset),
            ("workers", &self.workers),
            ("out", &self.out),
            ("format", &self.format),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
        .collect()
    }
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Command {
        match c {
            Cmd::Table => Command::Table,
            Cmd::Orbit => Command::Orbit,
            Cmd::Corridor => Command::Corridor,
            Cmd::Cells => Command::Cells,
            Cmd::ReturnTail => Command::ReturnTail,
            Cmd::Expansion => Command::Expansion,
            Cmd::Correlations => Command::Correlations,
            Cmd::Verify => Command::Verify,
        }
    }
}

pub enum Failure {
    Config(String),
    Numerical(flatbill::Error),
    Io(std::io::Error),
    Acceptance,
}

impl From<flatbill::Error> for Failure {
    fn from(e: flatbill::Error) -> Self {
        Failure::Numerical(e)
    }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &cli.flags.config {
        cfg.apply_file(path)?;
    }
    for (k, v) in cli.flags.pairs() {
        cfg.set(k, v)
            .map_err(|e| format!("--{}: {e}", k.replace('_', "-")))?;
    }
    let cfg = cfg.resolve(cli.command.into());
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(w) = cfg.workers {
        if let Err(e) = flatbill::parallel::install_workers(w) {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli.command.into(), &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Io(e)) => {
            eprintln!("cannot write output: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Acceptance) => ExitCode::from(3),
    }
}
