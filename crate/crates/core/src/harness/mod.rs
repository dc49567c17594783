//! Named experiments, their configuration and their reports.

pub mod config;
pub mod experiments;
pub mod report;
pub mod suite;
pub mod svg;

pub use config::{ExperimentConfig, ExperimentKind, MeshSpec};
pub use experiments::run_experiment;
pub use report::{Report, Verdict};
pub use suite::{run_and_write, run_suite, SuiteOutcome};
