//! `qbe`: experiment runner for quantum bootstrap embedding.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 the run did not
//! converge, 4 numerical or I/O failure. The default output directory is
//! taken from `QBE_OUTPUT_DIR` when neither `--out` nor `output_dir` is set.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error in `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error("{0}")]
    Core(#[from] qbe::QbeError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use qbe::QbeError as E;
        match self {
            CliError::Config { .. } => 2,
            CliError::Core(E::InvalidArgument(_) | E::Parse { .. } | E::UnsupportedElement(_)) => 2,
            CliError::NotConverged(_) | CliError::Core(E::NotConverged { .. }) => 3,
            CliError::Core(_) | CliError::Io(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(name = "qbe", version, about = "Quantum bootstrap embedding experiments on hydrogen chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML); defaults are used for missing keys.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write one-electron integrals of the configured system.
    Integrals(Common),
    /// Run restricted Hartree–Fock and write orbital energies.
    Scf(Common),
    /// Run bootstrap embedding and write the convergence trace.
    BeRun(Common),
    /// Tomography vs SWAP sample counts over overlap sizes, and the two-H4 overlap estimate.
    OverlapSweep(Common),
    /// SWAP vs amplitude-estimation eigensolver calls over precision and overlap.
    Crossover(Common),
    /// Import or export FCIDUMP files.
    Fcidump {
        #[command(subcommand)]
        action: FcidumpAction,
    },
}

#[derive(Subcommand)]
enum FcidumpAction {
    /// Write the configured system as `system.fcidump`.
    Export(Common),
    /// Read a file and print its header.
    Import {
        path: PathBuf,
        /// Also compute the exact ground-state energy.
        #[arg(long)]
        fci: bool,
    },
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let cfg = ExperimentConfig::default();
            cfg.validate()?;
            cfg
        }
    };
    let out = cfg.resolve_output_dir(common.out.as_deref());
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Integrals(c) => load(&c).and_then(|(cfg, out)| commands::integrals(&cfg, &out)),
        Command::Scf(c) => load(&c).and_then(|(cfg, out)| commands::scf(&cfg, &out)),
        Command::BeRun(c) => load(&c).and_then(|(cfg, out)| commands::be_run(&cfg, &out)),
        Command::OverlapSweep(c) => load(&c).and_then(|(cfg, out)| commands::overlap_sweep(&cfg, &out)),
        Command::Crossover(c) => load(&c).and_then(|(cfg, out)| commands::crossover(&cfg, &out)),
        Command::Fcidump { action: FcidumpAction::Export(c) } => {
            load(&c).and_then(|(cfg, out)| commands::fcidump_export(&cfg, &out))
        }
        Command::Fcidump { action: FcidumpAction::Import { path, fci } } => commands::fcidump_import(&path, fci),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qbe: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
