//! Scenario files, seeded generators, the check runner, the self-test suites and
//! the JSON report.

mod generate;
mod report;
mod run;
mod scenario;
pub mod selftest;

pub use generate::{generate_random, random_function, MapKind, RandomConfig, MAX_CYCLE};
pub use report::{CheckRecord, Real, Report, REPORT_SCHEMA, ResidualRecord, Status, SuiteRecord, WitnessPayload, WitnessValue};
pub use run::{invert_summary, polar_summary, run_checks, run_checks_timed, witness_summary, TOOL_NAME};
pub use scenario::{load_scenario, parse_scenario, Scenario, ScenarioTerm};
pub use selftest::selftest;
