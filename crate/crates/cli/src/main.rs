use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use thermokernel_cli::{load_scenario, run_scenario, run_suite, CliError, RunOptions, Suite, DEFAULT_SEED};

#[derive(Debug, Parser)]
#[command(name = "thermokernel", version, about = "Run thermodynamics scenarios and invariant suites")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Execute a JSON scenario and write its requested artifacts.
    Run {
        file: PathBuf,
        /// Directory for CSV and JSON artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Run consecutive commands on disjoint atoms concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Run a randomized invariant suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

fn run(file: PathBuf, out: Option<PathBuf>, seed: u64, parallel: bool) -> Result<(), CliError> {
    let scenario = load_scenario(&file)?;
    let report = run_scenario(&scenario, &RunOptions { out, seed, parallel })?;
    for r in &report.results {
        let mark = if r.pass { "PASS" } else { "FAIL" };
        println!("{mark} {} {}: {}", r.cmd, r.id, r.summary);
        for f in &r.failures {
            println!("    {f}");
        }
    }
    for a in &report.artifacts {
        println!("wrote {}", a.display());
    }
    match report.failure() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn verify(suite: Suite, seed: u64) -> Result<(), CliError> {
    let reports = run_suite(suite, seed);
    let mut failed = Vec::new();
    for r in &reports {
        let mark = if r.passed() { "PASS" } else { "FAIL" };
        println!("{mark} {}: {} checks, {} failures; {}", r.suite, r.checked, r.failures, r.summary);
        for c in &r.counterexamples {
            println!("    counterexample: {c}");
        }
        if !r.passed() {
            failed.push(r.suite);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assertion(format!("suites failed: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run { file, out, seed, parallel } => run(file, out, seed, parallel),
        Cmd::Verify { suite, seed } => verify(suite, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("thermokernel: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
