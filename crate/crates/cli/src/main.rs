//! `flywheel <experiment> --config FILE [--seed N] [--workers N] [--out DIR] [--validate-only]`
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 physics regime has no
//! answer, 4 numerical guard, 1 I/O.

mod config;
mod experiments;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flywheel_core::{ErrorClass, FlywheelError};

use config::{Experiment, ExperimentConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Physics(FlywheelError),
    Io(String),
}

impl From<FlywheelError> for CliError {
    fn from(e: FlywheelError) -> Self {
        Self::Physics(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "invalid configuration: {m}"),
            Self::Physics(e) => match e.class() {
                ErrorClass::Validation => write!(f, "invalid parameters: {e}"),
                ErrorClass::Regime => write!(f, "regime error: {e}"),
                ErrorClass::Numerical => write!(f, "numerical guard: {e}"),
            },
            Self::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Physics(e) => match e.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Regime => 3,
                ErrorClass::Numerical => 4,
            },
            Self::Io(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "flywheel", version, about = "Quantum flywheel charged by a two-qubit heat engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form and numerical stationary state.
    Steady(Common),
    /// Efficiency surface over (kappa_f, gamma_m).
    Sweep(Common),
    /// One conditional trajectory.
    Sme(Common),
    /// Ensemble of conditional trajectories.
    Ensemble(Common),
    /// Full two-qubit + oscillator dynamics against the effective bath.
    Tripartite(Common),
    /// Engine driven by a classical field.
    Classical(Common),
    /// Stationary energy currents.
    Energy(Common),
    /// Unstabilized growth under the engine bath.
    Instability(Common),
    /// Experiment named by the `experiment` key of the config.
    Run(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check configuration and regime, write nothing.
    #[arg(long)]
    validate_only: bool,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (kind, args) = match cli.command {
        Command::Steady(a) => (Some(Experiment::Steady), a),
        Command::Sweep(a) => (Some(Experiment::Sweep), a),
        Command::Sme(a) => (Some(Experiment::Sme), a),
        Command::Ensemble(a) => (Some(Experiment::Ensemble), a),
        Command::Tripartite(a) => (Some(Experiment::Tripartite), a),
        Command::Classical(a) => (Some(Experiment::Classical), a),
        Command::Energy(a) => (Some(Experiment::Energy), a),
        Command::Instability(a) => (Some(Experiment::Instability), a),
        Command::Run(a) => (None, a),
    };
    let mut cfg = ExperimentConfig::load(&args.config)?;
    let kind = match (kind, cfg.experiment) {
        (Some(k), Some(c)) if k != c => {
            return Err(CliError::Config(format!(
                "config is for experiment '{}' but '{}' was requested",
                c.name(),
                k.name()
            )))
        }
        (Some(k), _) => k,
        (None, Some(c)) => c,
        (None, None) => return Err(CliError::Config("`run` needs an `experiment` key in the config".into())),
    };
    cfg.experiment = Some(kind);
    if let Some(s) = args.seed {
        cfg.numerics.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.numerics.workers = w;
    }
    if let Some(o) = &args.out {
        cfg.output.dir = o.display().to_string();
    }
    if args.validate_only {
        for line in experiments::validate(kind, &cfg)? {
            println!("{line}");
        }
        println!("configuration ok");
        return Ok(());
    }
    let artifacts = experiments::run(kind, &cfg)?;
    let dir = PathBuf::from(&cfg.output.dir);
    output::write_all(&dir, kind.name(), &artifacts)?;
    for a in &artifacts {
        println!("{}", dir.join(&a.name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
