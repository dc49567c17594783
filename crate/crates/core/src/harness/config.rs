//! Experiment configuration files.
//!
//! A config is a TOML table. Every key has a default, so the smallest valid
//! file is `experiment = "constants"`:
//!
//! ```toml
//! experiment = "bounds-sheet"
//! d = 1
//! M = 2.0
//! eps = [0.25, 0.5]
//! target = [0.0]          # defaults to the origin of R^d
//! n_samples = 100000      # default depends on the experiment
//! seed = 7
//! tol = 1e-8
//! max_iter = 100000
//! execution = "parallel"  # or "sequential"
//!
//! [mesh]
//! kind = "rect"           # or "segment" / "file"
//! lo = [1.0, 1.0]
//! hi = [2.0, 2.0]
//! n1 = 16
//! n2 = 16
//!
//! [output]
//! dir = "reports"
//! csv = true
//! svg = true
//! ```
//!
//! A suite file holds shared keys at the top level and one `[[run]]` table
//! per experiment; keys in a run override the shared ones.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{build_rect_mesh, build_segment_mesh, CompactMesh, MeshDoc, SpacePoint, TimePoint};
use crate::error::{Error, Result};
use crate::par::Execution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Covariance,
    Decomposition,
    Capacity,
    Constants,
    BoundsSheet,
    BoundsAdditive,
    Moments,
    Frostman,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Covariance,
        ExperimentKind::Decomposition,
        ExperimentKind::Capacity,
        ExperimentKind::Constants,
        ExperimentKind::BoundsSheet,
        ExperimentKind::BoundsAdditive,
        ExperimentKind::Moments,
        ExperimentKind::Frostman,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Covariance => "covariance",
            ExperimentKind::Decomposition => "decomposition",
            ExperimentKind::Capacity => "capacity",
            ExperimentKind::Constants => "constants",
            ExperimentKind::BoundsSheet => "bounds-sheet",
            ExperimentKind::BoundsAdditive => "bounds-additive",
            ExperimentKind::Moments => "moments",
            ExperimentKind::Frostman => "frostman",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Samples per Monte Carlo estimate when the config does not say.
    pub fn default_samples(self) -> usize {
        match self {
            ExperimentKind::BoundsSheet | ExperimentKind::BoundsAdditive | ExperimentKind::Moments => {
                100_000
            }
            _ => 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeshSpec {
    Rect {
        lo: [f64; 2],
        hi: [f64; 2],
        n1: usize,
        n2: usize,
    },
    Segment {
        a: [f64; 2],
        b: [f64; 2],
        n: usize,
    },
    /// A JSON mesh document.
    File { path: PathBuf },
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec::Rect {
            lo: [1.0, 1.0],
            hi: [2.0, 2.0],
            n1: 16,
            n2: 16,
        }
    }
}

impl MeshSpec {
    pub fn build(&self) -> Result<CompactMesh> {
        match self {
            MeshSpec::Rect { lo, hi, n1, n2 } => {
                build_rect_mesh(TimePoint::try_from(*lo)?, TimePoint::try_from(*hi)?, *n1, *n2)
            }
            MeshSpec::Segment { a, b, n } => {
                build_segment_mesh(TimePoint::try_from(*a)?, TimePoint::try_from(*b)?, *n)
            }
            MeshSpec::File { path } => {
                let doc: MeshDoc = serde_json::from_str(&std::fs::read_to_string(path)?)?;
                CompactMesh::try_from(doc)
            }
        }
    }

    /// The same shape with every cell count multiplied by `factor`; `None`
    /// for file meshes.
    pub fn refined(&self, factor: usize) -> Option<MeshSpec> {
        match self {
            MeshSpec::Rect { lo, hi, n1, n2 } => Some(MeshSpec::Rect {
                lo: *lo,
                hi: *hi,
                n1: n1 * factor,
                n2: n2 * factor,
            }),
            MeshSpec::Segment { a, b, n } => Some(MeshSpec::Segment {
                a: *a,
                b: *b,
                n: n * factor,
            }),
            MeshSpec::File { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    /// File stem of the report; defaults to the experiment name.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub svg: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            name: None,
            csv: true,
            svg: true,
        }
    }
}

/// Anchors and targets of the decomposition experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionSpec {
    #[serde(default = "default_anchor_ord1")]
    pub anchor_ord1: [f64; 2],
    #[serde(default = "default_targets_ord1")]
    pub targets_ord1: Vec<[f64; 2]>,
    #[serde(default = "default_anchor_ord2")]
    pub anchor_ord2: [f64; 2],
    #[serde(default = "default_targets_ord2")]
    pub targets_ord2: Vec<[f64; 2]>,
}

impl Default for DecompositionSpec {
    fn default() -> Self {
        Self {
            anchor_ord1: default_anchor_ord1(),
            targets_ord1: default_targets_ord1(),
            anchor_ord2: default_anchor_ord2(),
            targets_ord2: default_targets_ord2(),
        }
    }
}

/// Most targets per decomposition; keeps the exact reference sampler small.
pub const MAX_DECOMPOSITION_TARGETS: usize = 10;

impl DecompositionSpec {
    fn problems(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let cases = [
            ("ord1", self.anchor_ord1, &self.targets_ord1),
            ("ord2", self.anchor_ord2, &self.targets_ord2),
        ];
        for (label, anchor, targets) in cases {
            if targets.len() > MAX_DECOMPOSITION_TARGETS {
                errs.push(format!(
                    "decomposition.targets_{label} has {} points, at most {MAX_DECOMPOSITION_TARGETS} allowed",
                    targets.len()
                ));
            }
            let Ok(t) = TimePoint::try_from(anchor) else {
                errs.push(format!("decomposition.anchor_{label} {anchor:?} is not a time point"));
                continue;
            };
            for s in targets {
                let ordered = match TimePoint::try_from(*s) {
                    Ok(s) if label == "ord1" => s.dominates_ord1(&t),
                    Ok(s) => s.dominates_ord2(&t),
                    Err(_) => false,
                };
                if !ordered {
                    errs.push(format!("decomposition target {s:?} is not {label}-ordered after {anchor:?}"));
                }
            }
        }
        if self.anchor_ord2[1] <= 0.0 {
            errs.push("decomposition.anchor_ord2 needs a positive second coordinate".into());
        }
        errs
    }
}

/// Meshes and refinement depth of the capacity and contrast experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementSpec {
    /// Number of doublings after the base mesh.
    #[serde(default = "default_doublings")]
    pub doublings: usize,
    /// Coarsest square mesh.
    #[serde(default = "default_square")]
    pub square: MeshSpec,
    /// Coarsest segment mesh.
    #[serde(default = "default_segment")]
    pub segment: MeshSpec,
    /// Levels of the triadic chain, starting at 3 cells per side.
    #[serde(default = "default_triadic_levels")]
    pub triadic_levels: usize,
    /// Hit probabilities are estimated only on meshes up to this many atoms.
    #[serde(default = "default_hit_atoms")]
    pub max_hit_atoms: usize,
    /// Cells per side of the grid used for image-measure estimates.
    #[serde(default = "default_grid_res")]
    pub grid_res: usize,
}

impl Default for RefinementSpec {
    fn default() -> Self {
        Self {
            doublings: default_doublings(),
            triadic_levels: default_triadic_levels(),
            square: default_square(),
            segment: default_segment(),
            max_hit_atoms: default_hit_atoms(),
            grid_res: default_grid_res(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(rename = "M", alias = "m", default = "default_m")]
    pub m: f64,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// Target point `a`; the origin when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub decomposition: DecompositionSpec,
    #[serde(default)]
    pub refinement: RefinementSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("reports")
}
fn yes() -> bool {
    true
}
fn default_d() -> usize {
    1
}
fn default_m() -> f64 {
    2.0
}
fn default_eps() -> Vec<f64> {
    vec![0.25, 0.5]
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    100_000
}
fn default_anchor_ord1() -> [f64; 2] {
    [1.0, 1.0]
}
fn default_targets_ord1() -> Vec<[f64; 2]> {
    vec![[1.0, 1.5], [1.5, 1.0], [1.5, 1.5], [2.0, 2.0], [1.2, 1.8], [2.0, 1.0]]
}
fn default_anchor_ord2() -> [f64; 2] {
    [1.0, 2.0]
}
fn default_targets_ord2() -> Vec<[f64; 2]> {
    vec![[1.0, 1.5], [1.5, 2.0], [1.5, 1.5], [2.0, 1.0], [1.2, 0.5], [1.8, 0.25]]
}
fn default_doublings() -> usize {
    3
}
fn default_triadic_levels() -> usize {
    3
}
fn default_square() -> MeshSpec {
    MeshSpec::Rect {
        lo: [1.0, 1.0],
        hi: [2.0, 2.0],
        n1: 4,
        n2: 4,
    }
}
fn default_segment() -> MeshSpec {
    MeshSpec::Segment {
        a: [1.0, 1.5],
        b: [2.0, 1.5],
        n: 4,
    }
}
fn default_hit_atoms() -> usize {
    256
}
fn default_grid_res() -> usize {
    64
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self::from_table(toml::Table::from_iter([(
            "experiment".to_string(),
            toml::Value::String(experiment.name().into()),
        )]))
        .expect("defaults form a valid config")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_table(t: toml::Table) -> Result<Self> {
        let cfg: Self = toml::Value::Table(t).try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("config serializes to a table")
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples.unwrap_or(self.experiment.default_samples())
    }

    pub fn target_point(&self) -> Result<SpacePoint> {
        match &self.target {
            Some(a) => SpacePoint::new(a.clone()),
            None => SpacePoint::origin(self.d),
        }
    }

    /// File stem for reports and tables.
    pub fn stem(&self) -> String {
        self.output
            .name
            .clone()
            .unwrap_or_else(|| self.experiment.name().to_string())
    }

    /// Checks every precondition of the experiment and reports all
    /// violations together.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.d == 0 {
            errs.push("d must be at least 1".to_string());
        }
        if !(self.m.is_finite() && self.m > 0.0) {
            errs.push(format!("M must be positive, got {}", self.m));
        }
        if self.eps.is_empty() {
            errs.push("eps list is empty".to_string());
        }
        for e in &self.eps {
            if !(e.is_finite() && *e > 0.0) {
                errs.push(format!("eps {e} must be positive"));
            }
        }
        let needs_box = matches!(
            self.experiment,
            ExperimentKind::BoundsSheet | ExperimentKind::BoundsAdditive | ExperimentKind::Moments
        );
        if needs_box {
            for e in self.eps.iter().filter(|e| **e >= self.m) {
                errs.push(format!("eps {e} must be below M = {}", self.m));
            }
        }
        if self.n_samples == Some(0) {
            errs.push("n_samples must be at least 1".to_string());
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            errs.push(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            errs.push("max_iter must be at least 1".to_string());
        }
        if let Some(a) = &self.target {
            if a.len() != self.d {
                errs.push(format!("target has {} coordinates but d = {}", a.len(), self.d));
            } else if a.iter().any(|x| !(x.abs() <= self.m)) {
                errs.push(format!("target {a:?} lies outside [-M, M]^d"));
            }
        }
        match self.mesh.build() {
            Ok(mesh) => {
                if needs_box && mesh.c1() <= 0.0 {
                    errs.push("mesh touches the origin (c1 = 0)".to_string());
                }
            }
            Err(e) => errs.push(format!("mesh: {e}")),
        }
        if self.experiment == ExperimentKind::Decomposition {
            errs.extend(self.decomposition.problems());
        }
        if self.experiment == ExperimentKind::Capacity
            && !matches!(self.refinement.square, MeshSpec::Rect { .. })
        {
            errs.push("refinement.square must be a rect mesh".to_string());
        }
        if self.experiment == ExperimentKind::Frostman {
            for (name, spec) in [
                ("refinement.square", &self.refinement.square),
                ("refinement.segment", &self.refinement.segment),
            ] {
                if let Err(e) = spec.build() {
                    errs.push(format!("{name}: {e}"));
                }
                if spec.refined(2).is_none() {
                    errs.push(format!("{name} must be a rect or segment mesh"));
                }
            }
        }
        if self.refinement.triadic_levels == 0 {
            errs.push("refinement.triadic_levels must be at least 1".to_string());
        }
        if self.refinement.grid_res == 0 {
            errs.push("refinement.grid_res must be positive".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// A parsed suite: one config per `[[run]]` table.
pub fn load_suite(path: &Path) -> Result<Vec<ExperimentConfig>> {
    parse_suite(&std::fs::read_to_string(path)?)
}

pub fn parse_suite(s: &str) -> Result<Vec<ExperimentConfig>> {
    let mut shared: toml::Table = toml::from_str(s)?;
    let runs = match shared.remove("run") {
        Some(toml::Value::Array(runs)) => runs,
        _ => return Err(Error::Config(vec!["suite needs at least one [[run]] table".into()])),
    };
    let mut errs = Vec::new();
    let mut out = Vec::new();
    for (i, run) in runs.into_iter().enumerate() {
        let toml::Value::Table(run) = run else {
            errs.push(format!("run {i}: not a table"));
            continue;
        };
        let mut merged = shared.clone();
        merge(&mut merged, run);
        match ExperimentConfig::from_table(merged) {
            Ok(c) => out.push(c),
            Err(Error::Config(list)) => {
                errs.extend(list.into_iter().map(|e| format!("run {i}: {e}")))
            }
            Err(e) => errs.push(format!("run {i}: {e}")),
        }
    }
    if out.is_empty() && errs.is_empty() {
        errs.push("suite needs at least one [[run]] table".into());
    }
    if errs.is_empty() {
        Ok(out)
    } else {
        Err(Error::Config(errs))
    }
}

/// Recursive table merge; values in `over` win. A subtable whose `kind`
/// differs from the base's replaces it whole.
pub fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o))
                if o.get("kind").is_none_or(|kind| b.get("kind") == Some(kind)) =>
            {
                merge(b, o)
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Applies `key.path=value` to a table; the value is parsed as TOML and
/// falls back to a plain string.
pub fn set_key(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment.split_once('=').ok_or_else(|| {
        Error::Config(vec![format!("override `{assignment}` is not of the form key=value")])
    })?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut keys: Vec<&str> = path.trim().split('.').collect();
    let last = keys.pop().filter(|k| !k.is_empty()).ok_or_else(|| {
        Error::Config(vec![format!("override `{assignment}` has an empty key")])
    })?;
    let mut node = table;
    for k in keys {
        let entry = node
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::Config(vec![format!("`{k}` in `{path}` is not a table")])),
        };
    }
    node.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ExperimentConfig::from_toml_str("experiment = \"constants\"").unwrap();
        assert_eq!(c.d, 1);
        assert_eq!(c.m, 2.0);
        assert_eq!(c.eps, vec![0.25, 0.5]);
        assert_eq!(c.n_samples(), 20_000);
        assert_eq!(c.mesh, MeshSpec::default());
        assert_eq!(c, ExperimentConfig::new(ExperimentKind::Constants));
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::new(ExperimentKind::BoundsSheet);
        let s = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&s).unwrap(), c);
    }

    #[test]
    fn empty_eps_is_rejected() {
        let e = ExperimentConfig::from_toml_str("experiment = \"bounds-sheet\"\neps = []").unwrap_err();
        assert!(matches!(e, Error::Config(ref v) if v.iter().any(|m| m.contains("eps list"))));
    }

    #[test]
    fn all_errors_reported_together() {
        let src = "experiment = \"moments\"\nd = 0\neps = [3.0]\ntol = -1.0";
        let Error::Config(errs) = ExperimentConfig::from_toml_str(src).unwrap_err() else {
            panic!("expected config error");
        };
        assert!(errs.len() >= 3, "{errs:?}");
    }

    #[test]
    fn unknown_keys_and_experiments_fail_to_parse() {
        assert!(matches!(
            ExperimentConfig::from_toml_str("experiment = \"capacity\"\nbogus = 1"),
            Err(Error::ConfigParse(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml_str("experiment = \"nope\""),
            Err(Error::ConfigParse(_))
        ));
    }

    #[test]
    fn mesh_kinds_parse() {
        let c = ExperimentConfig::from_toml_str(
            "experiment = \"capacity\"\n[mesh]\nkind = \"segment\"\na = [1.0, 1.5]\nb = [2.0, 1.5]\nn = 8",
        )
        .unwrap();
        assert_eq!(c.mesh.build().unwrap().len(), 8);
        assert_eq!(
            c.mesh.refined(2),
            Some(MeshSpec::Segment {
                a: [1.0, 1.5],
                b: [2.0, 1.5],
                n: 16
            })
        );
    }

    #[test]
    fn suite_merges_shared_keys() {
        let src = "seed = 5\nd = 2\n[[run]]\nexperiment = \"constants\"\n[[run]]\nexperiment = \"capacity\"\nd = 1\n";
        let runs = parse_suite(src).unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!((runs[0].seed, runs[0].d), (5, 2));
        assert_eq!((runs[1].seed, runs[1].d), (5, 1));
        assert!(parse_suite("seed = 1").is_err());
    }

    #[test]
    fn merge_replaces_mesh_of_another_kind() {
        let mut base = ExperimentConfig::new(ExperimentKind::Capacity).to_table();
        let over: toml::Table =
            toml::from_str("[mesh]\nkind = \"segment\"\na = [1.0, 1.0]\nb = [2.0, 1.0]\nn = 4").unwrap();
        merge(&mut base, over);
        let c = ExperimentConfig::from_table(base).unwrap();
        assert_eq!(c.mesh.build().unwrap().len(), 4);
        let mut base = ExperimentConfig::new(ExperimentKind::Capacity).to_table();
        merge(&mut base, toml::from_str("[mesh]\nn1 = 2").unwrap());
        assert!(matches!(
            ExperimentConfig::from_table(base).unwrap().mesh,
            MeshSpec::Rect { n1: 2, n2: 16, .. }
        ));
    }

    #[test]
    fn overrides_parse_values() {
        let mut t = ExperimentConfig::new(ExperimentKind::Capacity).to_table();
        set_key(&mut t, "d=3").unwrap();
        set_key(&mut t, "eps=[0.1, 0.2]").unwrap();
        set_key(&mut t, "output.dir=out/x").unwrap();
        set_key(&mut t, "mesh.n1=4").unwrap();
        let c = ExperimentConfig::from_table(t).unwrap();
        assert_eq!(c.d, 3);
        assert_eq!(c.eps, vec![0.1, 0.2]);
        assert_eq!(c.output.dir, PathBuf::from("out/x"));
        assert!(matches!(c.mesh, MeshSpec::Rect { n1: 4, n2: 16, .. }));
        assert!(set_key(&mut ExperimentConfig::new(ExperimentKind::Capacity).to_table(), "d").is_err());
    }
}
