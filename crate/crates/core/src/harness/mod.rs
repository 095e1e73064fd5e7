//! Config-driven Monte Carlo experiments and their reports.

pub mod config;
mod plot;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind, Overrides, Profile, RawConfig};
pub use report::write_report;
pub use run::{run_experiment, Check, ExperimentReport, SummaryRow, TrialRecord};
