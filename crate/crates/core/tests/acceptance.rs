//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sheetcap::capacity::lattice_error_bound;
use sheetcap::harness::{run_experiment, ExperimentConfig, ExperimentKind, MeshSpec, Report, Verdict};
use sheetcap::{
    brute_force_energy_min, kernel_matrix, minimize_energy, CompactMesh, KernelMatrix, KernelSpec,
    SolverOptions, TimePoint,
};

type Check = Result<(bool, String), String>;

fn rect(n: usize) -> MeshSpec {
    MeshSpec::Rect {
        lo: [1.0, 1.0],
        hi: [2.0, 2.0],
        n1: n,
        n2: n,
    }
}

fn config(kind: ExperimentKind) -> ExperimentConfig {
    ExperimentConfig::new(kind)
}

fn run(cfg: &ExperimentConfig) -> Result<Report, String> {
    run_experiment(cfg).map_err(|e| e.to_string())
}

fn find<'a>(r: &'a Report, prefix: &str) -> Result<Vec<&'a Verdict>, String> {
    let v: Vec<&Verdict> = r.verdicts.iter().filter(|v| v.name.starts_with(prefix)).collect();
    if v.is_empty() {
        return Err(format!("no verdict named `{prefix}…`"));
    }
    Ok(v)
}

fn all_pass(vs: &[&Verdict]) -> bool {
    vs.iter().all(|v| v.pass && v.consistent())
}

fn covariance_fidelity() -> Check {
    let mut cfg = config(ExperimentKind::Covariance);
    cfg.mesh = rect(5);
    cfg.d = 2;
    cfg.n_samples = Some(20_000);
    let r = run(&cfg)?;
    let v = find(&r, "exact sampler covariance")?;
    Ok((all_pass(&v), format!("max |z| = {:.3} (limit 5) over 1275 entries", v[0].lhs)))
}

fn decomposition_laws() -> Check {
    let mut cfg = config(ExperimentKind::Decomposition);
    cfg.n_samples = Some(20_000);
    let atoms = cfg.decomposition.targets_ord1.len().max(cfg.decomposition.targets_ord2.len()) + 1;
    let r = run(&cfg)?;
    let mut vs = find(&r, "ord1 decomposition vs exact")?;
    vs.extend(find(&r, "ord2 decomposition vs exact")?);
    let pin = find(&r, "bridge pinned")?;
    let exact_zero = pin[0].lhs == 0.0;
    vs.extend(pin);
    Ok((
        all_pass(&vs) && exact_zero && atoms <= 10,
        format!(
            "two-sample max |z|: ord1 {:.3}, ord2 {:.3} (limit 5); {atoms} atoms; bridge ends max |V| = {}",
            vs[0].lhs, vs[1].lhs, vs[2].lhs
        ),
    ))
}

fn random_mesh(rng: &mut ChaCha8Rng) -> Result<CompactMesh, String> {
    let n = rng.random_range(1..=4);
    let atoms = (0..n)
        .map(|_| TimePoint::new(rng.random_range(0.5..2.5), rng.random_range(0.5..2.5)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    CompactMesh::from_atoms(atoms, vec![1.0; n], 0.01).map_err(|e| e.to_string())
}

fn solver_correctness() -> Check {
    const GRID: usize = 1000;
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut worst = 0.0_f64;
    let mut ok = true;
    for _ in 0..50 {
        let mesh = random_mesh(&mut rng)?;
        let d = rng.random_range(1..=3);
        let eps = rng.random_range(0.05..1.0);
        let spec = KernelSpec::for_dimension(d, eps).map_err(|e| e.to_string())?;
        let k = kernel_matrix(&mesh, &spec).map_err(|e| e.to_string())?;
        let s = minimize_energy(&k, &opts).map_err(|e| e.to_string())?;
        let b = brute_force_energy_min(&k, GRID).map_err(|e| e.to_string())?;
        let allowed = opts.tol * s.energy + lattice_error_bound(&k, GRID);
        let dev = (s.energy - b.energy).abs() / allowed;
        worst = worst.max(dev);
        ok &= dev <= 1.0;
    }
    let k = KernelMatrix::from_rows(vec![vec![10.0, 1.0], vec![1.0, 10.0]]).map_err(|e| e.to_string())?;
    let two = minimize_energy(&k, &opts).map_err(|e| e.to_string())?;
    let closed = (two.energy - 5.5).abs() <= 1e-6 && (two.capacity - 1.0 / 5.5).abs() <= 1e-6;
    Ok((
        ok && closed,
        format!(
            "50 meshes: worst |solver - oracle| / (tol + lattice error) = {worst:.3}; \
             2-atom energy {:.9}, capacity {:.9}",
            two.energy, two.capacity
        ),
    ))
}

fn capacity_monotonicity() -> Check {
    let r = run(&config(ExperimentKind::Capacity))?;
    let vs = find(&r, "capacity nondecreasing")?;
    let worst = vs.iter().map(|v| v.lhs).fold(0.0, f64::max);
    Ok((
        all_pass(&vs),
        format!("{} chains (restriction, doubling, triadic x 2 eps); largest relative drop {worst:e} (slack 2e-8)", vs.len()),
    ))
}

fn moments_config() -> ExperimentConfig {
    let mut cfg = config(ExperimentKind::Moments);
    cfg.mesh = rect(4);
    cfg.d = 1;
    cfg.m = 2.0;
    cfg.eps = vec![0.5];
    cfg.n_samples = Some(100_000);
    cfg
}

fn moment_bounds(r: &Report) -> Check {
    let mut vs = find(r, "mean occupation")?;
    vs.extend(find(r, "second moment")?);
    Ok((
        all_pass(&vs),
        format!(
            "E I = {:.5} >= c3 eps^d = {:.3e}; E I^2 = {:.5} <= {:.5} (4 s.e. slack)",
            vs[0].rhs, vs[0].lhs, vs[1].lhs, vs[1].rhs
        ),
    ))
}

fn paley_zygmund(r: &Report) -> Check {
    let vs = find(r, "Paley-Zygmund")?;
    Ok((
        all_pass(&vs),
        format!(
            "P(I > 0) = {:.5} >= (E I)^2 / E I^2 = {:.5}, slack {:.2e}",
            vs[0].rhs, vs[0].lhs, vs[0].slack
        ),
    ))
}

fn bounds_config(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = config(kind);
    cfg.mesh = rect(16);
    cfg.d = 1;
    cfg.m = 2.0;
    cfg.eps = vec![0.25, 0.5];
    cfg.n_samples = Some(100_000);
    cfg
}

fn sandwich_detail(r: &Report) -> String {
    r.verdicts
        .iter()
        .filter(|v| v.name.starts_with("lower") || v.name.starts_with("upper"))
        .map(|v| format!("{} margin x{:.2e}", &v.name[..v.name.find(':').unwrap_or(v.name.len())], v.ratio.unwrap_or(f64::NAN)))
        .collect::<Vec<_>>()
        .join("; ")
}

fn sheet_sandwich() -> Check {
    let r = run(&bounds_config(ExperimentKind::BoundsSheet))?;
    let mut vs = find(&r, "lower bound")?;
    vs.extend(find(&r, "upper bound")?);
    Ok((all_pass(&vs) && vs.len() == 4, sandwich_detail(&r)))
}

fn additive_sandwich() -> Check {
    let r = run(&bounds_config(ExperimentKind::BoundsAdditive))?;
    let caveat = r.caveats.iter().any(|c| c.contains("stand-ins"));
    let vs: Vec<&Verdict> = r.verdicts.iter().collect();
    let p: Vec<String> = r
        .estimates
        .iter()
        .map(|e| format!("p_hat({}) = {:.4} +- {:.4}", e.eps.unwrap_or(f64::NAN), e.estimate.mean, e.estimate.ci_width() / 2.0))
        .collect();
    Ok((
        all_pass(&vs) && vs.len() == 10 && caveat,
        format!("{}; {}; caveat flagged: {caveat}", p.join(", "), sandwich_detail(&r)),
    ))
}

fn frostman_contrast() -> Check {
    let r = run(&config(ExperimentKind::Frostman))?;
    let drops = find(&r, "segment d=3 capacity drops")?;
    let square = find(&r, "square d=1")?;
    let detail = format!(
        "segment d=3 drops per doubling [{}] (need >= 0.2); square d=1 largest change {:.4} (need < 0.1)",
        drops.iter().map(|v| format!("{:.3}", v.rhs)).collect::<Vec<_>>().join(", "),
        square[0].lhs
    );
    Ok((all_pass(&drops) && drops.len() == 3 && all_pass(&square), detail))
}

fn strip_timestamp(json: &str) -> String {
    json.lines()
        .filter(|l| !l.trim_start().starts_with("\"generated_at\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn written_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let p = e.map_err(|e| e.to_string())?.path();
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        let bytes = fs::read(&p).map_err(|e| e.to_string())?;
        let bytes = if name.ends_with(".json") {
            strip_timestamp(&String::from_utf8_lossy(&bytes)).into_bytes()
        } else {
            bytes
        };
        out.push((name, bytes));
    }
    out.sort();
    Ok(out)
}

fn determinism() -> Check {
    let mut differing = Vec::new();
    let mut files = 0;
    for kind in ExperimentKind::ALL {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut cfg = config(kind);
        cfg.seed = 42;
        cfg.output.dir = dir.path().to_path_buf();
        let mut seen = Vec::new();
        for _ in 0..2 {
            let (report, _) = sheetcap::harness::run_and_write(&cfg).map_err(|e| e.to_string())?;
            seen.push((report.fingerprint().map_err(|e| e.to_string())?, written_files(dir.path())?));
        }
        files += seen[0].1.len();
        if seen[0] != seen[1] {
            differing.push(kind.name());
        }
    }
    Ok((
        differing.is_empty(),
        if differing.is_empty() {
            format!("8 experiments run twice, {files} report files byte-identical apart from the timestamp")
        } else {
            format!("reports differ for {}", differing.join(", "))
        },
    ))
}

struct Outcome {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn timed(id: usize, title: &'static str, limit_secs: Option<f64>, f: impl FnOnce() -> Check) -> Outcome {
    let start = Instant::now();
    let result = f();
    let secs = start.elapsed().as_secs_f64();
    let in_time = limit_secs.is_none_or(|l| secs < l);
    let limit = limit_secs.map_or(String::new(), |l| format!(" (limit {l:.0} s)"));
    let (pass, detail) = match result {
        Ok((pass, detail)) => (pass && in_time, format!("{detail}; {secs:.1} s{limit}")),
        Err(e) => (false, format!("error: {e}; {secs:.1} s{limit}")),
    };
    let o = Outcome {
        id,
        title,
        pass,
        detail,
    };
    println!(
        "{} criterion {}: {}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.id,
        o.title,
        o.detail
    );
    o
}

fn main() -> ExitCode {
    let mut outcomes = vec![
        timed(1, "covariance fidelity", Some(60.0), covariance_fidelity),
        timed(2, "decomposition laws", Some(120.0), decomposition_laws),
        timed(3, "solver correctness", Some(60.0), solver_correctness),
        timed(4, "capacity monotonicity", Some(60.0), capacity_monotonicity),
    ];
    let start = Instant::now();
    let moments = run(&moments_config());
    let shared = start.elapsed().as_secs_f64();
    outcomes.push(timed(5, "moment bounds", Some(120.0 - shared), || {
        moment_bounds(moments.as_ref().map_err(Clone::clone)?)
    }));
    outcomes.push(timed(6, "Paley-Zygmund", Some(60.0 - shared), || {
        paley_zygmund(moments.as_ref().map_err(Clone::clone)?)
    }));
    outcomes.push(timed(7, "sheet capacity sandwich", Some(180.0), sheet_sandwich));
    outcomes.push(timed(8, "additive capacity sandwich", Some(180.0), additive_sandwich));
    outcomes.push(timed(9, "Frostman contrast", Some(60.0), frostman_contrast));
    outcomes.push(timed(10, "determinism", None, determinism));
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!(
        "{} of {} criteria passed",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
