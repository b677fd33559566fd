use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rbm_qst::harness::{run_command, Command, RunConfig};
use rbm_qst::Error;

/// Reconstruct transverse-field Ising ground states with RBMs and measure
/// the resources a reconstruction needs.
#[derive(Parser, Debug)]
#[command(name = "rbm-qst", version)]
struct Cli {
    /// `key = value` config file; a previous run's manifest.txt works too.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for independent sweep points; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Override any config key, e.g. `--set qubit_sizes=6,8`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Exact ground state, a measurement dataset and its statistics.
    GenData,
    /// Train one RBM until the energy criterion holds or the budget runs out.
    Train,
    /// Evaluate the energy criterion for `model`.
    Estimate,
    /// Minimal hidden units per (N, h/J).
    SweepNh,
    /// Minimal training-set size per (N, h/J).
    SweepM,
    /// Iteratively prune and fine-tune `model`.
    Prune,
    /// Sorted weight magnitudes of `model`.
    Spectrum,
    /// Bias ratios and spin-flip deviation of `model`.
    Symmetry,
    /// Line fits of a minimal_nh.csv table (`fit_input`).
    Fit,
}

impl Sub {
    fn command(self) -> Command {
        match self {
            Sub::GenData => Command::GenData,
            Sub::Train => Command::Train,
            Sub::Estimate => Command::Estimate,
            Sub::SweepNh => Command::SweepNh,
            Sub::SweepM => Command::SweepM,
            Sub::Prune => Command::Prune,
            Sub::Spectrum => Command::Spectrum,
            Sub::Symmetry => Command::Symmetry,
            Sub::Fit => Command::Fit,
        }
    }
}

const EXIT_INVALID: u8 = 2;
const EXIT_CRITERION: u8 = 3;
const EXIT_IO: u8 = 4;

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::Precondition(_) | Error::NoConvergence { .. } | Error::NonFinite { .. } => EXIT_CRITERION,
        _ => EXIT_INVALID,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("rbm-qst: invalid config: {e}");
            return ExitCode::from(if matches!(e, Error::Io(_)) {
                EXIT_IO
            } else {
                EXIT_INVALID
            });
        }
    };
    let command = cli.command.command();
    match run_command(command, &cfg, &cli.out_dir) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.criterion_met {
                ExitCode::SUCCESS
            } else {
                eprintln!("rbm-qst: {}: criterion not met within budget", command.name());
                ExitCode::from(EXIT_CRITERION)
            }
        }
        Err(e) => {
            eprintln!("rbm-qst: {}: {e}", command.name());
            ExitCode::from(exit_code(&e))
        }
    }
}
