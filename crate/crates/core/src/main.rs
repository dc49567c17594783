use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sheetcap::harness::config::{merge, set_key};
use sheetcap::harness::suite::{exit_code_for, run_configs, EXIT_FAIL, EXIT_PASS};
use sheetcap::harness::{run_and_write, ExperimentConfig, ExperimentKind};
use sheetcap::Result;

/// Brownian sheet hitting probabilities, capacities and their bounds.
#[derive(Parser)]
#[command(name = "sheetcap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sampler covariances against closed forms.
    Covariance(RunArgs),
    /// Path decompositions against the exact sampler.
    Decomposition(RunArgs),
    /// Truncated capacities and their monotone limits.
    Capacity(RunArgs),
    /// Bound constants and their cross-checks.
    Constants(RunArgs),
    /// Capacity sandwich of the sheet's hit probability.
    BoundsSheet(RunArgs),
    /// Capacity sandwich for additive Brownian motion.
    BoundsAdditive(RunArgs),
    /// Occupation-integral moment bounds.
    Moments(RunArgs),
    /// Capacity of a square against a segment under refinement.
    Frostman(RunArgs),
    /// Runs every `[[run]]` table of a suite file.
    Suite {
        file: PathBuf,
        /// Output directory for every run.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Disable parallel sampling in every run.
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    /// Box radius M.
    #[arg(long = "M", alias = "m")]
    m: Option<f64>,
    /// Comma-separated radii.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    sequential: bool,
    /// Any config key, e.g. `--set mesh.n1=8`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn table(&self, kind: ExperimentKind) -> Result<toml::Table> {
        let mut t = ExperimentConfig::new(kind).to_table();
        if let Some(path) = &self.config {
            let file: toml::Table = toml::from_str(&std::fs::read_to_string(path)?)?;
            if file.contains_key("m") {
                t.remove("M");
            }
            merge(&mut t, file);
        }
        let mut flags = toml::Table::new();
        flags.insert("experiment".into(), kind.name().into());
        if let Some(v) = self.seed {
            flags.insert("seed".into(), toml::Value::Integer(v as i64));
        }
        if let Some(v) = &self.out {
            let mut output = toml::Table::new();
            output.insert("dir".into(), v.display().to_string().into());
            flags.insert("output".into(), output.into());
        }
        if let Some(v) = self.d {
            flags.insert("d".into(), toml::Value::Integer(v as i64));
        }
        if let Some(v) = self.m {
            t.remove("m");
            flags.insert("M".into(), v.into());
        }
        if let Some(v) = &self.eps {
            flags.insert("eps".into(), v.clone().into());
        }
        if let Some(v) = self.n_samples {
            flags.insert("n_samples".into(), toml::Value::Integer(v as i64));
        }
        if let Some(v) = self.tol {
            flags.insert("tol".into(), v.into());
        }
        if let Some(v) = self.max_iter {
            flags.insert("max_iter".into(), toml::Value::Integer(v as i64));
        }
        if self.sequential {
            flags.insert("execution".into(), "sequential".into());
        }
        merge(&mut t, flags);
        for s in &self.set {
            set_key(&mut t, s)?;
        }
        Ok(t)
    }
}

fn run_one(kind: ExperimentKind, args: &RunArgs) -> Result<i32> {
    let cfg = ExperimentConfig::from_table(args.table(kind)?)?;
    let (report, files) = match run_and_write(&cfg) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(EXIT_FAIL);
        }
    };
    for v in &report.verdicts {
        let status = if v.pass { "PASS" } else { "FAIL" };
        let op = if v.strict { "<" } else { "<=" };
        println!(
            "{status} {}: {:e} {op} {:e} + {:e}",
            v.name, v.lhs, v.rhs, v.slack
        );
    }
    for c in &report.caveats {
        println!("caveat: {c}");
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(if report.passed { EXIT_PASS } else { EXIT_FAIL })
}

fn run_suite(file: &Path, out: &Option<PathBuf>, sequential: bool) -> Result<i32> {
    let mut configs = sheetcap::harness::config::load_suite(file)?;
    for c in &mut configs {
        if let Some(dir) = out {
            c.output.dir = dir.clone();
        }
        if sequential {
            c.execution = sheetcap::Execution::Sequential;
        }
    }
    let outcome = run_configs(&configs);
    print!("{}", outcome.summary());
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Suite {
            file,
            out,
            sequential,
        } => run_suite(file, out, *sequential),
        Command::Covariance(a) => run_one(ExperimentKind::Covariance, a),
        Command::Decomposition(a) => run_one(ExperimentKind::Decomposition, a),
        Command::Capacity(a) => run_one(ExperimentKind::Capacity, a),
        Command::Constants(a) => run_one(ExperimentKind::Constants, a),
        Command::BoundsSheet(a) => run_one(ExperimentKind::BoundsSheet, a),
        Command::BoundsAdditive(a) => run_one(ExperimentKind::BoundsAdditive, a),
        Command::Moments(a) => run_one(ExperimentKind::Moments, a),
        Command::Frostman(a) => run_one(ExperimentKind::Frostman, a),
    };
    let code = result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code_for(&e)
    });
    ExitCode::from(code as u8)
}
