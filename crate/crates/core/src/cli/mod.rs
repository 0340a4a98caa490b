//! Batch runner: configuration files, solves, convergence studies and CSV
//! output.

mod config;
mod run;

pub use config::{parse_config, parse_number, DiscKind, Resolved, RunConfig, KEYS};
pub use run::{
    convergence_study, exit_code, run, solve, study, write_indicators, write_rates, write_report, write_solution,
    RunOutcome, StudyRow, SATURATION,
};
