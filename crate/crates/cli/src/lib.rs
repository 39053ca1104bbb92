//! Scenario runner and verification suites built on `thermokernel`.

pub mod error;
pub mod scenario;
pub mod verify;

pub use error::CliError;
pub use scenario::{load_scenario, parse_scenario, run_scenario, CommandResult, RunOptions, RunReport, Scenario};
pub use verify::{run_suite, Suite, SuiteReport};

/// Seed used by randomized commands and suites when none is given.
pub const DEFAULT_SEED: u64 = 42;
