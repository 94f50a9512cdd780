mod commands;
mod config;
mod field;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<einfields::Error> for CliError {
    fn from(e: einfields::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(format!("json: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(name = "einfields", version, about = "Neural metric fields and exact spacetime experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
    /// JSON run configuration; defaults are used for anything omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (EINFIELDS_OUT takes precedence).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to available cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Fail on any non-finite value instead of writing it out.
    #[arg(long, global = true)]
    pub f64_strict: bool,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Cmd {
    /// Sample the configured metric on its grid and write a training dataset.
    Gen {
        /// Report the sample count without generating.
        #[arg(long)]
        dry_run: bool,
    },
    /// Fit a network to a dataset (generated on the fly when none is given).
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// MAE and relative L2 of a checkpoint (or the analytic field) against the exact metric.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Curvature invariants on grid midpoints or the configured plane.
    Curvature {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Integrate a geodesic; with a checkpoint, also the learned one and their deviation.
    Geodesic {
        /// Force the circular-orbit speed.
        #[arg(long)]
        circular: bool,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Ring of free particles in a plane wave, closed form and deviation equation.
    GwRing,
    /// Weyl scalar Psi4 on a (z, t) grid by both routes.
    Psi4,
    /// Spin-weighted harmonic Gram matrix and mode extraction of a synthetic strain.
    SwshModes,
    /// Automatic versus finite-difference metric derivatives over step sizes.
    FdCompare {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Storage and compression figures.
    Report {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

impl Cmd {
    pub fn name(&self) -> &'static str {
        match self {
            Cmd::Gen { .. } => "gen",
            Cmd::Train { .. } => "train",
            Cmd::Eval { .. } => "eval",
            Cmd::Curvature { .. } => "curvature",
            Cmd::Geodesic { .. } => "geodesic",
            Cmd::GwRing => "gw-ring",
            Cmd::Psi4 => "psi4",
            Cmd::SwshModes => "swsh-modes",
            Cmd::FdCompare { .. } => "fd-compare",
            Cmd::Report { .. } => "report",
        }
    }
}

fn setup(cli: &Cli) -> Result<(RunConfig, PathBuf), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.train.seed = s;
    }
    cfg.validate()?;
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    let out = std::env::var_os("EINFIELDS_OUT")
        .map(PathBuf::from)
        .or_else(|| cli.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(cli.cmd.name()));
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("config.json"), serde_json::to_string_pretty(&cfg)?)?;
    Ok((cfg, out))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = setup(&cli).and_then(|(cfg, out)| {
        let ctx = commands::Ctx { cfg, out, strict: cli.f64_strict };
        commands::run(&cli.cmd, &ctx)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("einfields {}: {e}", cli.cmd.name());
            ExitCode::from(match e {
                CliError::Config(_) => 3,
                CliError::Runtime(_) => 1,
            })
        }
    }
}
