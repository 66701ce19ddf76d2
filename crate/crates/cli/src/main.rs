//! `deforce`: evaluate derivative-expansion and proximity-force functionals
//! from JSON run configs.
//!
//! Exit codes: 0 ok, 1 check failure, 2 config error, 3 numerical failure.

mod commands;
mod config;
mod output;
mod suites;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, Preset, RunConfig};
use output::Sink;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] deforce_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("check failed: {}", .0.join(", "))]
    CheckFailed(Vec<String>),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "deforce", version, about = "Derivative-expansion and proximity-force evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run config (a previous run's manifest.json also works)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: config `out`, else ./deforce-out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Relative quadrature tolerance
    #[arg(long, global = true)]
    quad_tol: Option<f64>,
    /// Planform radius of compact objects as a fraction of R
    #[arg(long, global = true)]
    rho_m_frac: Option<f64>,
    /// Worker threads
    #[arg(long, global = true, env = "DEFORCE_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate PFA / DE2 / DE4 functionals of one profile
    Eval,
    /// Fit the next-to-leading-order coefficient along a ladder of gaps
    Gamma {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
    /// Run the invariant suites
    Check {
        #[arg(long)]
        suite: Option<String>,
    },
    /// Compare PFA, DE2, Derjaguin, Blocki and SEI on one profile
    Compare,
    /// Level-set Jacobian J(h) and the linearized-Jacobian force
    Jacobian,
    /// Surface-element integration between two sheets
    Sei,
    /// DE2 over a list of a/R values, to CSV
    Sweep,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Eval => "eval",
            Command::Gamma { .. } => "gamma",
            Command::Check { .. } => "check",
            Command::Compare => "compare",
            Command::Jacobian => "jacobian",
            Command::Sei => "sei",
            Command::Sweep => "sweep",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("DEFORCE_THREADS must be at least 1".into()));
        }
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (raw, base) = match &cli.config {
        Some(path) => (
            RunConfig::load(path)?,
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    let overrides = Overrides {
        quad_tol: cli.quad_tol,
        rho_m_frac: cli.rho_m_frac,
        preset: match &cli.command {
            Command::Gamma { preset } => *preset,
            _ => None,
        },
    };
    let mut cfg = raw.resolve(&overrides)?;
    let out = cli.out.clone().or(cfg.out.clone()).unwrap_or_else(|| PathBuf::from("deforce-out"));
    // the manifest must re-run into the same place only if asked to
    cfg.out = None;
    let mut sink = Sink::new(out)?;
    let result = match &cli.command {
        Command::Eval => commands::eval(&cfg, &base, &mut sink),
        Command::Gamma { .. } => commands::gamma(&cfg, &base, &mut sink),
        Command::Check { suite } => commands::check(&cfg, &base, suite.as_deref(), &mut sink),
        Command::Compare => commands::compare(&cfg, &base, &mut sink),
        Command::Jacobian => commands::jacobian(&cfg, &base, &mut sink),
        Command::Sei => commands::sei(&cfg, &base, &mut sink),
        Command::Sweep => commands::sweep(&cfg, &base, &mut sink),
    };
    if matches!(result, Ok(()) | Err(CliError::CheckFailed(_))) {
        sink.finish(cli.command.name(), &cfg, &units(&cli.command))?;
    }
    result
}

fn units(c: &Command) -> Vec<(&'static str, &'static str)> {
    let energy = "natural units (hbar = c = 1, eps0 explicit); per unit length for one-dimensional bases";
    let length = "user base length";
    match c {
        Command::Sweep => vec![
            ("a_over_R", "dimensionless"),
            ("F0", energy),
            ("F2", energy),
            ("total", energy),
            ("err", energy),
            ("ratio_to_lead", "dimensionless"),
        ],
        Command::Gamma { .. } => vec![("a_over_R", "dimensionless"), ("ratio", "dimensionless"), ("ratio_err", "dimensionless")],
        Command::Jacobian => vec![("h_lo", length), ("h_hi", length), ("h_center", length), ("J", "length^(n-1)"), ("force", energy)],
        _ => vec![("lengths", length), ("energies", energy)],
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("deforce: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
