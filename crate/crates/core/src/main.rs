use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dirac_lab::experiments::{run, Command};
use dirac_lab::{LabError, RunConfig};

#[derive(Parser)]
#[command(name = "dirac-lab", version, about = "Ground states of the nonlinear Dirac-Choquard equation on periodic boxes")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// worker threads (0 = rayon default)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// override solver.seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// dimension, used when no config file is given
    #[arg(long, global = true, default_value_t = 3)]
    dim: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// fit d and derive the closed-form constants
    Calibrate,
    /// residual ladder for the standard bubble
    BubbleVerify,
    /// energies and residuals of grafted test spinors
    GraftSweep,
    /// ground state at the first configured lambda
    Solve,
    /// ground states across the configured lambdas
    LambdaSweep,
    /// list the discrete Dirac spectrum
    Spectrum,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Calibrate => Command::Calibrate,
            Cmd::BubbleVerify => Command::BubbleVerify,
            Cmd::GraftSweep => Command::GraftSweep,
            Cmd::Solve => Command::Solve,
            Cmd::LambdaSweep => Command::LambdaSweep,
            Cmd::Spectrum => Command::Spectrum,
        }
    }
}

fn is_config_error(e: &LabError) -> bool {
    matches!(
        e,
        LabError::Config(_)
            | LabError::InvalidDimension(..)
            | LabError::InvalidGrid(_)
            | LabError::InvalidParameter(_)
            | LabError::OnSpectrum { .. }
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::new(cli.dim)),
    };
    let mut cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = cli.seed {
        cfg.solver.seed = s;
    }
    let threads = rayon::current_num_threads();
    match run(cli.command.into(), &cfg, &cli.out, threads) {
        Ok(o) => {
            for p in &o.outputs {
                println!("wrote {}", p.display());
            }
            if o.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("experiment checks failed; see {}", cli.out.join("manifest.json").display());
                ExitCode::from(1)
            }
        }
        Err(e) if is_config_error(&e) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
