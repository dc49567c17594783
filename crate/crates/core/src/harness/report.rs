//! Verification reports and their on-disk forms.
//!
//! A report is written as `<stem>.json`, one `<stem>_<table>.csv` per table
//! and one `<stem>_<plot>.svg` per plot. Column orders of every table are
//! fixed by the experiment that produces it and listed in the README.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use super::svg::Plot;
use crate::capacity::CapacityResult;
use crate::constants::{ConstantSet, RelationReport};
use crate::error::Result;
use crate::montecarlo::MCEstimate;
use crate::seed::SeedSpec;

/// Bumped whenever a field is renamed, removed or changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

/// Key of the only field that differs between identical runs.
pub const TIMESTAMP_KEY: &str = "generated_at";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Software {
    pub name: &'static str,
    pub version: &'static str,
}

impl Software {
    pub fn current() -> Self {
        Self {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

/// One inequality `lhs ≤ rhs + slack` (strict when `strict` is set).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub strict: bool,
    /// `rhs + slack − lhs`; nonnegative (positive when strict) iff pass.
    pub margin: f64,
    /// `rhs / lhs` when both are positive.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    pub pass: bool,
}

impl Verdict {
    pub fn at_most(name: impl Into<String>, lhs: f64, rhs: f64, slack: f64) -> Self {
        Self::build(name.into(), lhs, rhs, slack, false)
    }

    pub fn below(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self::build(name.into(), lhs, rhs, 0.0, true)
    }

    fn build(name: String, lhs: f64, rhs: f64, slack: f64, strict: bool) -> Self {
        let margin = rhs + slack - lhs;
        let pass = if strict { margin > 0.0 } else { margin >= 0.0 };
        let ratio = (lhs > 0.0 && rhs > 0.0).then(|| rhs / lhs);
        Self {
            name,
            lhs,
            rhs,
            slack,
            strict,
            margin,
            ratio,
            pass,
        }
    }

    /// Recomputes `pass` from the stored numbers.
    pub fn consistent(&self) -> bool {
        let pass = if self.strict {
            self.lhs < self.rhs + self.slack
        } else {
            self.lhs <= self.rhs + self.slack
        };
        pass == self.pass
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapacityEntry {
    pub label: String,
    /// Truncation requested; the kernel uses `max(eps, mesh_gauge)`.
    pub eps: f64,
    pub atoms: usize,
    pub result: CapacityResult,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateEntry {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub estimate: MCEstimate,
    pub seed: SeedSpec,
}

/// Flat numeric table, also written as CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub software: Software,
    pub experiment: ExperimentKind,
    /// Seconds since the Unix epoch.
    pub generated_at: u64,
    pub seed: u64,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relations: Option<RelationReport>,
    pub capacities: Vec<CapacityEntry>,
    pub estimates: Vec<EstimateEntry>,
    pub verdicts: Vec<Verdict>,
    /// Limitations the reader must know to interpret the verdicts.
    pub caveats: Vec<String>,
    pub notes: Vec<String>,
    pub tables: Vec<Table>,
    /// Large tables written only as CSV.
    #[serde(skip)]
    pub detail_tables: Vec<Table>,
    #[serde(skip)]
    pub plots: Vec<Plot>,
    pub passed: bool,
}

impl Report {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            software: Software::current(),
            experiment: config.experiment,
            generated_at: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            seed: config.seed,
            config: config.clone(),
            constants: None,
            relations: None,
            capacities: Vec::new(),
            estimates: Vec::new(),
            verdicts: Vec::new(),
            caveats: Vec::new(),
            notes: Vec::new(),
            tables: Vec::new(),
            detail_tables: Vec::new(),
            plots: Vec::new(),
            passed: true,
        }
    }

    pub fn verdict(&mut self, v: Verdict) {
        self.passed &= v.pass;
        self.verdicts.push(v);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.pass)
    }

    /// Table by name, detail tables included.
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables
            .iter()
            .chain(&self.detail_tables)
            .find(|t| t.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The report as JSON with the timestamp removed: identical runs give
    /// identical strings.
    pub fn fingerprint(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove(TIMESTAMP_KEY);
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }

    /// Writes the JSON report and, when enabled, its CSV tables and SVG plots;
    /// returns every path written.
    pub fn write(&self, dir: &Path, stem: &str, csv: bool, svg: bool) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let json = dir.join(format!("{stem}.json"));
        fs::write(&json, self.to_json()? + "\n")?;
        written.push(json);
        if csv {
            for t in self.tables.iter().chain(&self.detail_tables) {
                let p = dir.join(format!("{stem}_{}.csv", t.name));
                t.write_csv(&p)?;
                written.push(p);
            }
        }
        if svg {
            for plot in &self.plots {
                let p = dir.join(format!("{stem}_{}.svg", plot.name));
                fs::write(&p, plot.render())?;
                written.push(p);
            }
        }
        Ok(written)
    }
}
