//! `gplab` — config-driven experiment runner for the regression asymptotics
//! laboratory. Each subcommand runs one study family and persists CSV/JSON
//! artifacts plus a manifest; `report` renders everything in an output
//! directory as markdown.

mod config;
mod manifest;
mod report;
mod studies;

use clap::{Args, Parser, Subcommand};
use config::ExperimentConfig;
use std::path::PathBuf;

/// Failures are split so the process can exit 2 on configuration problems
/// and 3 on runtime ones.
#[derive(Debug)]
pub enum RunError {
    Config(String),
    Runtime(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config error: {m}"),
            RunError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

#[derive(Parser)]
#[command(
    name = "gplab",
    version,
    about = "Simulation laboratory for nonparametric binary/Poisson/Gaussian/Laplace regression under Gaussian-process priors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset (smoke | paper-desk), applied before the config file.
    #[arg(long)]
    preset: Option<String>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's out_dir, else ./gplab-out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form KL divergence rates h(θ) with a brute-force
    /// per-observation oracle cross-check (claim family: existence and form
    /// of the KL rate).
    KlRate(RunArgs),
    /// Finite-n traces of n⁻¹ log Rₙ(θ) + h(θ) (claim family: asymptotic
    /// equipartition).
    Equipartition(RunArgs),
    /// Monte-Carlo prior mass of sieve complements G_n^c (claim family:
    /// exponentially small sieve-complement prior mass).
    SieveMass(RunArgs),
    /// MCMC posterior concentration: π(N_εₙ|Yₙ), π(A|Yₙ) and the −J(A)
    /// decay diagnostic (claim family: posterior convergence and its rate).
    Posterior(RunArgs),
    /// Hellinger/TV distance between the posterior predictive and the best
    /// predictor (claim family: predictive convergence under
    /// misspecification).
    Predictive(RunArgs),
    /// Empirical validation of the Hoeffding / Bernstein / Hanson-Wright /
    /// Poisson-MGF inequalities (claim family: the concentration bounds).
    Bounds(RunArgs),
    /// Render a markdown report from a run directory's manifest.
    Report {
        /// Directory containing manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), RunError> {
    let mut cfg = match &args.preset {
        Some(name) => config::preset(name)?,
        None => ExperimentConfig::default(),
    };
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg = ExperimentConfig::from_json(&text)?;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("gplab-out"));
    Ok((cfg, out))
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    let (study, args) = match &cli.command {
        Command::KlRate(a) => ("kl-rate", a.clone()),
        Command::Equipartition(a) => ("equipartition", a.clone()),
        Command::SieveMass(a) => ("sieve-mass", a.clone()),
        Command::Posterior(a) => ("posterior", a.clone()),
        Command::Predictive(a) => ("predictive", a.clone()),
        Command::Bounds(a) => ("bounds", a.clone()),
        Command::Report { out } => return report::emit_report(out),
    };
    let (cfg, out) = resolve(&args)?;
    studies::run_study(study, &cfg, &out)
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(e @ RunError::Config(_)) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
        Err(e @ RunError::Runtime(_)) => {
            eprintln!("{e}");
            std::process::exit(3);
        }
    }
}
