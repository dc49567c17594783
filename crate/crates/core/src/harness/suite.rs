//! Running experiments and suites, and mapping outcomes to exit codes.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::config::{load_suite, ExperimentConfig, ExperimentKind};
use super::experiments::run_experiment;
use super::report::Report;
use crate::error::{Error, Result};

/// Every verdict passed.
pub const EXIT_PASS: i32 = 0;
/// Some verdict failed or an experiment could not finish.
pub const EXIT_FAIL: i32 = 1;
/// The configuration could not be read or is invalid.
pub const EXIT_CONFIG: i32 = 2;

/// Runs one experiment and writes its report under the configured stem.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<(Report, Vec<PathBuf>)> {
    run_and_write_as(cfg, &cfg.stem())
}

fn run_and_write_as(cfg: &ExperimentConfig, stem: &str) -> Result<(Report, Vec<PathBuf>)> {
    let report = run_experiment(cfg)?;
    let paths = report.write(&cfg.output.dir, stem, cfg.output.csv, cfg.output.svg)?;
    Ok((report, paths))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub experiment: ExperimentKind,
    pub stem: String,
    pub passed: bool,
    /// Names of failed verdicts.
    pub failures: Vec<String>,
    /// Set when the experiment stopped with an error.
    pub error: Option<String>,
    pub files: Vec<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuiteOutcome {
    pub runs: Vec<RunOutcome>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.runs.iter().all(|r| r.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }

    /// One line per run, then one indented line per failure.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.runs {
            let status = if r.passed { "PASS" } else { "FAIL" };
            s.push_str(&format!("{status} {} ({})\n", r.stem, r.experiment.name()));
            for f in &r.failures {
                s.push_str(&format!("    failed: {f}\n"));
            }
            if let Some(e) = &r.error {
                s.push_str(&format!("    error: {e}\n"));
            }
        }
        s
    }
}

/// Runs the configs in order. Duplicate stems get a numeric suffix so no
/// report overwrites another.
pub fn run_configs(configs: &[ExperimentConfig]) -> SuiteOutcome {
    let mut seen = HashSet::new();
    let mut out = SuiteOutcome::default();
    for (i, cfg) in configs.iter().enumerate() {
        let mut stem = cfg.stem();
        if !seen.insert((cfg.output.dir.clone(), stem.clone())) {
            stem = format!("{stem}_{i}");
            seen.insert((cfg.output.dir.clone(), stem.clone()));
        }
        let run = match run_and_write_as(cfg, &stem) {
            Ok((report, files)) => RunOutcome {
                experiment: cfg.experiment,
                stem,
                passed: report.passed,
                failures: report.failures().map(|v| v.name.clone()).collect(),
                error: None,
                files,
            },
            Err(e) => RunOutcome {
                experiment: cfg.experiment,
                stem,
                passed: false,
                failures: Vec::new(),
                error: Some(e.to_string()),
                files: Vec::new(),
            },
        };
        out.runs.push(run);
    }
    out
}

/// Loads a suite file and runs it; errors only when the file itself is
/// unusable.
pub fn run_suite(path: &Path) -> Result<SuiteOutcome> {
    Ok(run_configs(&load_suite(path)?))
}

/// Exit code for an error raised before any experiment ran.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::ConfigParse(_) | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_FAIL,
    }
}
