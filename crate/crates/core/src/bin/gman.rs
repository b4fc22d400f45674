//! Scenario-driven batch checker.
//!
//! `gman check <scenario.toml>` parses, validates, and runs a scenario,
//! prints the report to stdout, and exits 0 exactly when every check
//! passed.  `gman fixtures list` and `gman fixtures dump <name>` expose
//! the scenarios bundled into the binary.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use gmanifold::scenario::{builtin, builtin_scenarios, RunOverrides, Scenario};

#[derive(Parser)]
#[command(
    name = "gman",
    version,
    about = "Exact and numeric checks for Lie algebra actions on coordinate charts"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Report rendering: human text or machine-readable JSON.
    #[arg(long, global = true, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,

    /// Override the scenario's ODE steps per unit time.
    #[arg(long, global = true, value_name = "N")]
    ode_steps: Option<usize>,

    /// Override the scenario's numeric tolerance.
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,

    /// Override the scenario's random seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Maximum number of concurrent check groups.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Structured,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse, validate, and run a scenario file.
    Check {
        /// Path to the scenario TOML file.
        scenario: PathBuf,
    },
    /// Bundled scenarios.
    Fixtures {
        #[command(subcommand)]
        cmd: FixturesCmd,
    },
}

#[derive(Subcommand)]
enum FixturesCmd {
    /// List the bundled scenario names.
    List,
    /// Print a bundled scenario to stdout.
    Dump { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Check { scenario } => check(&cli, scenario),
        Cmd::Fixtures { cmd: FixturesCmd::List } => {
            for b in builtin_scenarios() {
                println!("{:<14} {}", b.name, b.summary);
            }
            ExitCode::SUCCESS
        }
        Cmd::Fixtures { cmd: FixturesCmd::Dump { name } } => match builtin(name) {
            Some(b) => {
                print!("{}", b.text);
                ExitCode::SUCCESS
            }
            None => {
                let names: Vec<&str> = builtin_scenarios().iter().map(|b| b.name).collect();
                eprintln!("gman: no bundled scenario named '{name}' (have: {})", names.join(", "));
                ExitCode::from(2)
            }
        },
    }
}

fn check(cli: &Cli, path: &PathBuf) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("gman: cannot read {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let scenario = match Scenario::parse(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("gman: {e}");
            return ExitCode::from(2);
        }
    };
    let overrides = RunOverrides {
        ode_steps: cli.ode_steps,
        tol: cli.tol,
        seed: cli.seed,
        jobs: cli.jobs,
    };
    let start = Instant::now();
    let report = scenario.run(&overrides);
    let elapsed = start.elapsed();
    match cli.report {
        ReportFormat::Text => print!("{}", report.to_text()),
        ReportFormat::Structured => print!("{}", report.to_json()),
    }
    eprintln!("gman: {} checks in {:.1?}", report.checks.len(), elapsed);
    if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
