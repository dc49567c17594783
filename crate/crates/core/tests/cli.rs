use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sheetcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sheetcap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn single_experiment_writes_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let o = sheetcap(&["constants", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS A1 equals"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("constants.json")).unwrap()).unwrap();
    assert_eq!(json["experiment"], "constants");
    assert!(json["constants"]["A1"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("constants_sweep.csv").exists());
    assert!(dir.path().join("constants_sweep.svg").exists());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "experiment = \"constants\"\nseed = 3\nM = 5.0\n[mesh]\nkind = \"rect\"\nlo = [1.0, 1.0]\nhi = [3.0, 3.0]\nn1 = 2\nn2 = 2\n",
    );
    let out = dir.path().display().to_string();
    let o = sheetcap(&["constants", "--config", &cfg, "--seed", "9", "--M", "2.5", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("constants.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 9);
    assert_eq!(json["config"]["M"], 2.5);
    assert_eq!(json["config"]["mesh"]["hi"][0], 3.0);
}

#[test]
fn set_overrides_nested_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let o = sheetcap(&[
        "covariance",
        "--out",
        &out,
        "--d",
        "2",
        "--n-samples",
        "4000",
        "--set",
        "mesh.n1=3",
        "--set",
        "mesh.n2=2",
        "--set",
        "output.name=cov",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = fs::read_to_string(dir.path().join("cov_summary.csv")).unwrap();
    assert!(csv.starts_with("sampler,entries,max_abs_z,share_abs_z_above_2\n"));
    // 6 atoms x 2 coordinates: 78 upper-triangle entries
    assert!(csv.lines().nth(1).unwrap().starts_with("0,78,"));
}

#[test]
fn suite_of_passing_runs_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let suite = write(
        dir.path(),
        "suite.toml",
        &format!(
            "seed = 1\nn_samples = 2000\n[output]\ndir = \"{}\"\nsvg = false\n\
             [mesh]\nkind = \"rect\"\nlo = [1.0, 1.0]\nhi = [2.0, 2.0]\nn1 = 4\nn2 = 4\n\
             [[run]]\nexperiment = \"constants\"\n\
             [[run]]\nexperiment = \"moments\"\neps = [0.5]\n\
             [[run]]\nexperiment = \"bounds-sheet\"\n",
            dir.path().join("out").display()
        ),
    );
    let o = sheetcap(&["suite", &suite]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let reports: Vec<_> = fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json"))
        .collect();
    assert_eq!(reports.len(), 3, "{reports:?}");
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 3);
}

#[test]
fn failing_verdict_exits_one_and_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let suite = write(
        dir.path(),
        "suite.toml",
        &format!(
            "[output]\ndir = \"{}\"\n\
             [[run]]\nexperiment = \"constants\"\n\
             [[run]]\nexperiment = \"covariance\"\nn_samples = 1\n\
             [run.mesh]\nkind = \"rect\"\nlo = [1.0, 1.0]\nhi = [2.0, 2.0]\nn1 = 1\nn2 = 1\n",
            dir.path().display()
        ),
    );
    let o = sheetcap(&["suite", &suite]);
    assert_eq!(o.status.code(), Some(1));
    let s = stdout(&o);
    assert!(s.contains("PASS constants"));
    assert!(s.contains("FAIL covariance"));
    assert!(s.contains("failed: exact sampler covariance"));
}

#[test]
fn malformed_config_exits_two_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let bad_syntax = write(dir.path(), "a.toml", "[[run]]\nexperiment = \n");
    let o = sheetcap(&["suite", &bad_syntax]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config parse error"));

    let invalid = write(
        dir.path(),
        "b.toml",
        "[[run]]\nexperiment = \"bounds-sheet\"\neps = []\nd = 0\n",
    );
    let o = sheetcap(&["suite", &invalid]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("eps list is empty") && err.contains("d must be at least 1"), "{err}");

    let o = sheetcap(&["moments", "--eps", "3.0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("must be below M"));

    let o = sheetcap(&["suite", &dir.path().join("missing.toml").display().to_string()]);
    assert_eq!(o.status.code(), Some(2));
}
