//! `lawdon`: limit-problem sweeps, layered-lattice minimization, trial
//! configurations and cross-checks, driven by JSON configs.

mod commands;
mod config;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lawdon_core::Error;

use commands::Output;

#[derive(Parser)]
#[command(name = "lawdon", version, about = "Layered superconductor energy minimization and limit-problem tools")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "LAWDON_THREADS")]
    threads: Option<usize>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Io {
    /// JSON configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the limit energy for one applied field and classify the regime.
    Project(Io),
    /// Lower critical field over an angle grid, closed form and bisection (CSV).
    Hc1(Io),
    /// Regime and minimizer over an angle × magnitude grid (CSV).
    PhaseDiagram(Io),
    /// Minimize the lattice energy in one flux sector or across sectors.
    LdMin {
        #[command(flatten)]
        io: Io,
        /// Where to write the final state.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Build the explicit trial configuration and compare it with the bound.
    Trial {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Run the cross-validation suite; exits 4 if a check fails.
    Validate {
        /// Optional JSON configuration; defaults are used otherwise.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

pub enum Failure {
    Config(String),
    Solver(String),
    Property(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Property(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Property(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidParameter(_)
            | Error::DimensionMismatch(_)
            | Error::Inadmissible(_)
            | Error::NonPeriodic(_)
            | Error::OutOfScope(_)
            | Error::Format(_)
            | Error::Json(_)
            | Error::Io(_) => Failure::Config(msg),
            _ => Failure::Solver(msg),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Project(io) => commands::project(&config::load(&io.config)?, &Output { path: io.out.as_deref() })?,
        Command::Hc1(io) => commands::hc1_table(&config::load(&io.config)?, &Output { path: io.out.as_deref() })?,
        Command::PhaseDiagram(io) => commands::phase_diagram(&config::load(&io.config)?, &Output { path: io.out.as_deref() })?,
        Command::LdMin { io, state } => commands::ld_min(&config::load(&io.config)?, &Output { path: io.out.as_deref() }, state.as_deref())?,
        Command::Trial { io, state } => commands::trial(&config::load(&io.config)?, &Output { path: io.out.as_deref() }, state.as_deref())?,
        Command::Validate { config: cfg, out } => {
            let cfg = match cfg {
                Some(p) => config::load(&p)?,
                None => config::ValidateConfig::default(),
            };
            let report = validate::run(&cfg)?;
            Output { path: out.as_deref() }.json(&report)?;
            if !report.passed {
                let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
                return Err(Failure::Property(format!("failed checks: {}", failed.join(", "))));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
