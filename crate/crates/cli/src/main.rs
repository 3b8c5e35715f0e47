mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fk_kam::ErrorClass;

use commands::CliError;
use config::RunConfig;

/// Quasi-periodic equilibria of resonant Frenkel-Kontorova models.
#[derive(Parser)]
#[command(name = "fk-kam", version)]
struct Cli {
    /// TOML run configuration
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set numerics.grid_size=256`
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Newton iteration from the trivial guess
    Solve,
    /// Perturbative series in the potential amplitude
    Lindstedt,
    /// KAM solutions against series partial sums over task.mu_list
    Compare,
    /// Brute-force Diophantine constant of the frequency
    Diophantine,
    /// Solve on a uniform eta grid and check the eta symmetry
    SweepEta,
    /// Fast linear solves against the dense solve
    OracleCheck,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Solve => commands::solve(&cfg),
        Command::Lindstedt => commands::lindstedt(&cfg),
        Command::Compare => commands::compare(&cfg),
        Command::Diophantine => commands::diophantine(&cfg),
        Command::SweepEta => commands::sweep_eta(&cfg),
        Command::OracleCheck => commands::oracle_check(&cfg),
    }
}

/// (exit status, class, name)
fn classify(e: &CliError) -> (u8, &'static str, &'static str) {
    match e {
        CliError::Config(_) => (2, "Input", "ConfigError"),
        CliError::Io(..) => (5, "Internal", "IoError"),
        CliError::Check(_) => (5, "Internal", "OracleMismatch"),
        CliError::Solver(k) => match k.class() {
            ErrorClass::Input => (2, "Input", k.name()),
            ErrorClass::Precondition => (3, "Precondition", k.name()),
            ErrorClass::Convergence => (4, "Convergence", k.name()),
            ErrorClass::Internal => (5, "Internal", k.name()),
        },
    }
}

fn message(e: &CliError) -> String {
    match e {
        CliError::Config(c) => c.to_string(),
        CliError::Solver(k) => k.to_string(),
        CliError::Io(p, io) => format!("{}: {io}", p.display()),
        CliError::Check(m) => m.clone(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, class, name) = classify(&e);
            eprintln!("error_class={class}");
            eprintln!("error={name}");
            eprintln!("message={}", message(&e));
            ExitCode::from(code)
        }
    }
}
