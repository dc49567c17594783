//! Truncated Riesz kernels, discrete energies and capacities.
//!
//! For a kernel exponent `β` and truncation `ε ≥ 0` the kernel at sup time
//! distance `r` is
//!
//! ```text
//! κ(r) = max(ε, √r)^(−2β)
//! ```
//!
//! which is `r^(−β)` once `√r ≥ ε`. With `β = d/2` this is the kernel
//! governing ε-neighbourhood hitting for the d-dimensional sheet. The
//! capacity of a mesh is the reciprocal of the smallest energy `wᵀKw` over
//! probability vectors `w`, computed here by Frank–Wolfe on the simplex.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{build_rect_mesh, CompactMesh, TimePoint};
use crate::error::{invalid, Error, Result};
use crate::par::{map_indexed, Execution};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    beta: f64,
    truncation_eps: f64,
}

impl KernelSpec {
    pub fn new(beta: f64, truncation_eps: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(invalid("kernel exponent beta must be positive"));
        }
        if !(truncation_eps.is_finite() && truncation_eps >= 0.0) {
            return Err(invalid("truncation eps must be finite and nonnegative"));
        }
        Ok(Self {
            beta,
            truncation_eps,
        })
    }

    /// The kernel of the d-dimensional sheet: `β = d/2`.
    pub fn for_dimension(d: usize, truncation_eps: f64) -> Result<Self> {
        Self::new(d as f64 / 2.0, truncation_eps)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn truncation_eps(&self) -> f64 {
        self.truncation_eps
    }
}

pub fn kernel_value(spec: &KernelSpec, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(invalid("distance must be nonnegative"));
    }
    let cap = spec.truncation_eps.max(r.sqrt());
    if cap == 0.0 {
        return Err(Error::DivergentKernel);
    }
    Ok(cap.powf(-2.0 * spec.beta))
}

/// Dense symmetric Gram matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    data: Vec<f64>,
}

impl KernelMatrix {
    /// Builds from explicit rows; the matrix must be square, symmetric and
    /// have a positive diagonal.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(invalid("kernel matrix must be nonempty"));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: r.len(),
            });
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        let k = Self { n, data };
        for i in 0..n {
            if !(k.get(i, i) > 0.0 && k.get(i, i).is_finite()) {
                return Err(invalid("kernel diagonal must be positive and finite"));
            }
            for j in 0..i {
                if k.get(i, j) != k.get(j, i) || !k.get(i, j).is_finite() {
                    return Err(invalid("kernel matrix must be symmetric and finite"));
                }
            }
        }
        Ok(k)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * lambda).collect(),
        }
    }

    /// `K w`.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(w).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Headerless CSV, one matrix row per line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for i in 0..self.n {
            out.write_record(self.row(i).iter().map(f64::to_string))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Truncation actually applied by [`kernel_matrix`]: `truncation_eps` when
/// positive, the mesh gauge otherwise.
pub fn effective_eps(mesh: &CompactMesh, spec: &KernelSpec) -> f64 {
    if spec.truncation_eps > 0.0 {
        spec.truncation_eps
    } else {
        mesh.mesh_gauge()
    }
}

pub fn kernel_matrix(mesh: &CompactMesh, spec: &KernelSpec) -> Result<KernelMatrix> {
    kernel_matrix_with(mesh, spec, Execution::default())
}

/// [`kernel_matrix`] with an explicit execution mode; rows are assembled
/// independently.
pub fn kernel_matrix_with(
    mesh: &CompactMesh,
    spec: &KernelSpec,
    exec: Execution,
) -> Result<KernelMatrix> {
    let eps = effective_eps(mesh, spec);
    let spec = KernelSpec::new(spec.beta, eps)?;
    if eps == 0.0 {
        return Err(Error::DivergentKernel);
    }
    let atoms = mesh.atoms();
    let n = atoms.len();
    let rows = map_indexed(n, exec, |i| {
        atoms
            .iter()
            .map(|q| {
                kernel_value(&spec, atoms[i].sup_dist(q)).expect("truncation is positive")
            })
            .collect::<Vec<f64>>()
    });
    Ok(KernelMatrix {
        n,
        data: rows.into_iter().flatten().collect(),
    })
}

/// A probability vector on mesh atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
}

const MASS_TOLERANCE: f64 = 1e-12;

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("measure needs at least one atom"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("measure weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(invalid(format!("measure has total mass {total}, not 1")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("measure needs at least one atom"));
        }
        Ok(Self {
            weights: vec![1.0 / n as f64; n],
        })
    }

    /// Normalizes nonnegative masses to total one.
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0 && total.is_finite()) || masses.iter().any(|m| *m < 0.0) {
            return Err(invalid("masses must be nonnegative with positive total"));
        }
        Ok(Self {
            weights: masses.iter().map(|m| m / total).collect(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

impl TryFrom<Vec<f64>> for DiscreteMeasure {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        DiscreteMeasure::new(v)
    }
}

impl From<DiscreteMeasure> for Vec<f64> {
    fn from(m: DiscreteMeasure) -> Self {
        m.weights
    }
}

/// The quadratic form `wᵀKw`.
pub fn energy(k: &KernelMatrix, m: &DiscreteMeasure) -> Result<f64> {
    if k.len() != m.len() {
        return Err(Error::DimensionMismatch {
            expected: k.len(),
            got: m.len(),
        });
    }
    Ok(quadratic(k, m.weights()))
}

fn quadratic(k: &KernelMatrix, w: &[f64]) -> f64 {
    w.iter()
        .enumerate()
        .filter(|(_, wi)| **wi != 0.0)
        .map(|(i, wi)| wi * k.row(i).iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

/// Step rule for [`minimize_energy`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// Classical open-loop step `2 / (k + 2)` towards the Frank–Wolfe vertex.
    OpenLoop,
    /// Exact line search towards the Frank–Wolfe vertex.
    LineSearch,
    /// Pairwise steps: move mass from the worst active atom to the
    /// Frank–Wolfe vertex, with exact line search.
    #[default]
    Pairwise,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once the Frank–Wolfe gap is at most `tol · energy`.
    pub tol: f64,
    pub max_iter: usize,
    pub step: StepRule,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100_000,
            step: StepRule::Pairwise,
        }
    }
}

impl SolverOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub optimal_measure: DiscreteMeasure,
    pub energy: f64,
    /// `1 / energy`.
    pub capacity: f64,
    pub iterations: usize,
    /// Certified bound on `energy − min energy` (Frank–Wolfe gap for the
    /// solver, lattice error bound for the brute-force oracle).
    pub duality_gap: f64,
    pub converged: bool,
    /// The energy is known to be the global simplex minimum up to
    /// `duality_gap`.
    pub globally_certified: bool,
}

impl CapacityResult {
    fn new(w: Vec<f64>, energy: f64, iterations: usize, gap: f64, converged: bool) -> Self {
        let capacity = if energy.is_finite() && energy > 0.0 {
            1.0 / energy
        } else {
            0.0
        };
        Self {
            optimal_measure: DiscreteMeasure { weights: w },
            energy,
            capacity,
            iterations,
            duality_gap: gap,
            converged,
            globally_certified: false,
        }
    }

    /// `{energy, capacity, duality_gap, iterations, converged, globally_certified, weights}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "energy": self.energy,
            "capacity": self.capacity,
            "duality_gap": self.duality_gap,
            "iterations": self.iterations,
            "converged": self.converged,
            "globally_certified": self.globally_certified,
            "weights": self.optimal_measure.weights(),
        })
    }
}

fn argmin_first(g: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in g.iter().enumerate().skip(1) {
        if *v < g[best] {
            best = i;
        }
    }
    best
}

/// Minimizes `wᵀKw` over the probability simplex by Frank–Wolfe, starting
/// from the uniform measure.
///
/// The linear step picks the coordinate with the smallest gradient entry
/// (lowest index on ties). The returned `duality_gap` is the Frank–Wolfe gap
/// `∇f(w)ᵀ(w − e_s)` at the final iterate. When the gap is still above
/// `tol · energy` after `max_iter` steps the result is returned with
/// `converged = false`.
///
/// Truncated kernels are not positive semidefinite once the truncation
/// exceeds the atom spacing, and the iteration then stops at a stationary
/// point that need not be the global minimum. Up to
/// [`FACE_ENUMERATION_MAX_ATOMS`] atoms every face of the simplex is also
/// solved exactly, which finds the global minimum for any symmetric `K`.
/// `globally_certified` records whether the result is known to be global.
pub fn minimize_energy(k: &KernelMatrix, opts: &SolverOptions) -> Result<CapacityResult> {
    minimize_energy_from(k, &DiscreteMeasure::uniform(k.len())?, opts)
}

/// [`minimize_energy`] started from a given measure. Every step is a descent
/// step, so the final energy never exceeds that of `start`.
pub fn minimize_energy_from(
    k: &KernelMatrix,
    start: &DiscreteMeasure,
    opts: &SolverOptions,
) -> Result<CapacityResult> {
    let n = k.len();
    if start.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: start.len(),
        });
    }
    if !(opts.tol > 0.0) {
        return Err(invalid("solver tolerance must be positive"));
    }
    let mut w = start.weights().to_vec();
    // g = K w (half the gradient)
    let mut g = k.apply(&w);
    const REFRESH: usize = 1000;

    let mut iter = 0;
    loop {
        let e: f64 = w.iter().zip(&g).map(|(a, b)| a * b).sum();
        let s = argmin_first(&g);
        let gap = 2.0 * (e - g[s]);
        if gap <= opts.tol * e || iter >= opts.max_iter {
            break;
        }
        let ks = k.row(s);
        match opts.step {
            StepRule::OpenLoop | StepRule::LineSearch => {
                let gamma = if opts.step == StepRule::OpenLoop {
                    2.0 / (iter as f64 + 2.0)
                } else {
                    // f(w + γ(e_s − w)) = e + 2γ(g_s − e) + γ²(K_ss − 2g_s + e)
                    let curv = ks[s] - 2.0 * g[s] + e;
                    if curv > 0.0 {
                        ((e - g[s]) / curv).clamp(0.0, 1.0)
                    } else {
                        1.0
                    }
                };
                for ((wi, gi), ksi) in w.iter_mut().zip(g.iter_mut()).zip(ks) {
                    *wi *= 1.0 - gamma;
                    *gi = (1.0 - gamma) * *gi + gamma * ksi;
                }
                w[s] += gamma;
            }
            StepRule::Pairwise => {
                // away atom: largest gradient on the support
                let mut a = s;
                for i in (0..n).filter(|&i| w[i] > 0.0) {
                    if w[a] == 0.0 || g[i] > g[a] {
                        a = i;
                    }
                }
                if a == s {
                    break;
                }
                let ka = k.row(a);
                let max_step = w[a];
                let curv = ks[s] + ka[a] - 2.0 * ks[a];
                let gamma = if curv > 0.0 {
                    ((g[a] - g[s]) / curv).clamp(0.0, max_step)
                } else {
                    max_step
                };
                w[s] += gamma;
                if gamma == max_step {
                    w[a] = 0.0;
                } else {
                    w[a] -= gamma;
                }
                for ((gi, ksi), kai) in g.iter_mut().zip(ks).zip(ka) {
                    *gi += gamma * (ksi - kai);
                }
            }
        }
        iter += 1;
        if iter % REFRESH == 0 {
            g = k.apply(&w);
        }
    }

    let mut result = finish(k, w, iter, opts);
    if n <= FACE_ENUMERATION_MAX_ATOMS {
        if let Some(w) = best_face_point(k) {
            if quadratic(k, &w) < result.energy {
                result = finish(k, w, iter, opts);
            }
        }
        result.globally_certified = result.converged;
    } else {
        result.globally_certified = result.converged && is_positive_semidefinite(k);
    }
    Ok(result)
}

fn finish(k: &KernelMatrix, mut w: Vec<f64>, iter: usize, opts: &SolverOptions) -> CapacityResult {
    let total: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= total;
    }
    let g = k.apply(&w);
    let e: f64 = w.iter().zip(&g).map(|(a, b)| a * b).sum();
    let gap = (2.0 * (e - g[argmin_first(&g)])).max(0.0);
    CapacityResult::new(w, e, iter, gap, gap <= opts.tol * e)
}

/// Largest atom count for which [`minimize_energy`] enumerates simplex faces.
pub const FACE_ENUMERATION_MAX_ATOMS: usize = 8;

/// Largest atom count for which the positive-semidefinite check runs.
pub const PSD_CHECK_MAX_ATOMS: usize = 2048;

/// Best stationary point over the relative interiors of all faces.
///
/// The global minimum of a quadratic on the simplex is a stationary point of
/// the restriction to some face; faces whose bordered KKT system is singular
/// can be skipped because a minimizer then also lies on a smaller face.
fn best_face_point(k: &KernelMatrix) -> Option<Vec<f64>> {
    let n = k.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let m = support.len();
        let sys = DMatrix::from_fn(m + 1, m + 1, |r, c| match (r < m, c < m) {
            (true, true) => k.get(support[r], support[c]),
            (false, false) => 0.0,
            _ => 1.0,
        });
        let mut rhs = DVector::zeros(m + 1);
        rhs[m] = 1.0;
        let Some(sol) = sys.lu().solve(&rhs) else {
            continue;
        };
        if sol.iter().take(m).any(|v| !v.is_finite() || *v < -1e-12) {
            continue;
        }
        let mut w = vec![0.0; n];
        for (slot, i) in support.iter().enumerate() {
            w[*i] = sol[slot].max(0.0);
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        let e = quadratic(k, &w);
        if best.as_ref().is_none_or(|(b, _)| e < *b) {
            best = Some((e, w));
        }
    }
    best.map(|(_, w)| w)
}

/// Cholesky test with a relative jitter of `1e-12`; `false` above
/// [`PSD_CHECK_MAX_ATOMS`].
pub fn is_positive_semidefinite(k: &KernelMatrix) -> bool {
    let n = k.len();
    if n > PSD_CHECK_MAX_ATOMS {
        return false;
    }
    let jitter = 1e-12 * k.max_entry();
    let m = DMatrix::from_fn(n, n, |i, j| k.get(i, j) + if i == j { jitter } else { 0.0 });
    m.cholesky().is_some()
}

/// Largest atom count accepted by [`brute_force_energy_min`].
pub const BRUTE_FORCE_MAX_ATOMS: usize = 5;

/// Bound on how far the best lattice point of spacing `1/grid_steps` can be
/// above the simplex minimum: the gradient of `wᵀKw` is bounded by
/// `2 max|K|` in each coordinate and rounding moves at most `n/grid_steps`
/// mass in ℓ¹.
pub fn lattice_error_bound(k: &KernelMatrix, grid_steps: usize) -> f64 {
    2.0 * k.max_entry() * k.len() as f64 / grid_steps as f64
}

/// Exhaustive minimization over the simplex lattice `{w : grid_steps · w ∈ ℕⁿ}`.
///
/// Independent of [`minimize_energy`]; meant as an oracle for small `K`.
/// The returned `duality_gap` is [`lattice_error_bound`].
pub fn brute_force_energy_min(k: &KernelMatrix, grid_steps: usize) -> Result<CapacityResult> {
    let n = k.len();
    if n > BRUTE_FORCE_MAX_ATOMS {
        return Err(invalid(format!(
            "brute force handles at most {BRUTE_FORCE_MAX_ATOMS} atoms, got {n}"
        )));
    }
    if grid_steps == 0 {
        return Err(invalid("grid_steps must be positive"));
    }
    let bound = lattice_error_bound(k, grid_steps);
    if n == 1 {
        let mut r = CapacityResult::new(vec![1.0], k.get(0, 0), 1, 0.0, true);
        r.globally_certified = true;
        return Ok(r);
    }
    let mut search = LatticeSearch {
        k,
        steps: grid_steps,
        counts: vec![0; n],
        best: f64::INFINITY,
        best_counts: vec![0; n],
        visited: 0,
    };
    search.recurse(0, grid_steps);
    let w: Vec<f64> = search
        .best_counts
        .iter()
        .map(|c| *c as f64 / grid_steps as f64)
        .collect();
    let e = quadratic(k, &w);
    let mut r = CapacityResult::new(w, e, search.visited, bound, true);
    r.globally_certified = true;
    Ok(r)
}

struct LatticeSearch<'a> {
    k: &'a KernelMatrix,
    steps: usize,
    counts: Vec<usize>,
    best: f64,
    best_counts: Vec<usize>,
    visited: usize,
}

impl LatticeSearch<'_> {
    /// Fixes `counts[pos]` and recurses; the last two coordinates are swept
    /// along a line where the energy is a quadratic in the split.
    fn recurse(&mut self, pos: usize, remaining: usize) {
        let n = self.counts.len();
        if pos + 2 == n {
            self.sweep_line(remaining);
            return;
        }
        for c in 0..=remaining {
            self.counts[pos] = c;
            self.recurse(pos + 1, remaining - c);
        }
        self.counts[pos] = 0;
    }

    fn sweep_line(&mut self, remaining: usize) {
        let n = self.counts.len();
        let (p, q) = (n - 2, n - 1);
        let h = 1.0 / self.steps as f64;
        // base: counts[p] = 0, counts[q] = remaining; direction: e_p − e_q
        self.counts[p] = 0;
        self.counts[q] = remaining;
        let base: Vec<f64> = self.counts.iter().map(|c| *c as f64 * h).collect();
        let f0 = quadratic(self.k, &base);
        let kb = self.k.apply(&base);
        let slope = 2.0 * h * (kb[p] - kb[q]);
        let curv = h * h * (self.k.get(p, p) + self.k.get(q, q) - 2.0 * self.k.get(p, q));
        // f(j) = f0 + slope·j + curv·j²
        for j in 0..=remaining {
            let jf = j as f64;
            let f = f0 + slope * jf + curv * jf * jf;
            self.visited += 1;
            if f < self.best {
                self.best = f;
                self.counts[p] = j;
                self.counts[q] = remaining - j;
                self.best_counts.clone_from(&self.counts);
            }
        }
        self.counts[p] = 0;
        self.counts[q] = 0;
    }
}

/// Capacity of a mesh for the d-dimensional sheet: `β = d/2` and truncation
/// `max(eps, mesh_gauge)`.
pub fn capacity_of_mesh(
    mesh: &CompactMesh,
    d: usize,
    eps: f64,
    opts: &SolverOptions,
) -> Result<CapacityResult> {
    let spec = KernelSpec::for_dimension(d, eps.max(mesh.mesh_gauge()))?;
    minimize_energy(&kernel_matrix(mesh, &spec)?, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotoneReport {
    /// Truncation shared by every mesh of the chain.
    pub eps_common: f64,
    pub atoms: Vec<usize>,
    pub capacities: Vec<f64>,
    pub energies: Vec<f64>,
    pub converged: Vec<bool>,
    /// Whether each mesh contains the atoms of its predecessor.
    pub nested: Vec<bool>,
    /// Largest relative drop `(cap_k − cap_{k+1}) / cap_k`, zero if none.
    pub max_relative_drop: f64,
    /// Relative slack allowed per step: `2 · tol`.
    pub slack: f64,
    pub monotone: bool,
}

/// Capacities along a chain of meshes ordered by inclusion.
///
/// All meshes share one kernel: the truncation is `max(eps, gauge)` over the
/// largest gauge in the chain, so the capacities compare the same set
/// function on growing sets. When every atom of a mesh reappears in the next
/// one, the next solve is also warm-started from the previous optimum and the
/// lower of the two energies is kept; the reported capacities are then
/// nondecreasing even where the kernel is indefinite. The chain is reported
/// monotone when no step drops by more than `2 · tol` relative.
pub fn capacity_limit_check(
    meshes: &[CompactMesh],
    d: usize,
    eps: f64,
    opts: &SolverOptions,
) -> Result<MonotoneReport> {
    if meshes.is_empty() {
        return Err(invalid("chain needs at least one mesh"));
    }
    let eps_common = meshes
        .iter()
        .map(CompactMesh::mesh_gauge)
        .fold(eps, f64::max);
    let spec = KernelSpec::for_dimension(d, eps_common)?;
    let mut results: Vec<CapacityResult> = Vec::with_capacity(meshes.len());
    let mut nested = Vec::with_capacity(meshes.len());
    for (idx, mesh) in meshes.iter().enumerate() {
        let k = kernel_matrix(mesh, &spec)?;
        let mut best = minimize_energy(&k, opts)?;
        let embedding = idx
            .checked_sub(1)
            .and_then(|prev| embed(&meshes[prev], mesh));
        if let Some(slots) = &embedding {
            let mut w = vec![0.0; mesh.len()];
            for (wi, slot) in results[idx - 1].optimal_measure.weights().iter().zip(slots) {
                w[*slot] += wi;
            }
            let warm = minimize_energy_from(&k, &DiscreteMeasure::from_masses(&w)?, opts)?;
            if warm.energy < best.energy {
                best = warm;
            }
        }
        nested.push(embedding.is_some());
        results.push(best);
    }
    let capacities: Vec<f64> = results.iter().map(|r| r.capacity).collect();
    let max_relative_drop = capacities
        .windows(2)
        .map(|w| (w[0] - w[1]) / w[0])
        .fold(0.0_f64, f64::max);
    let slack = 2.0 * opts.tol;
    Ok(MonotoneReport {
        eps_common,
        atoms: meshes.iter().map(CompactMesh::len).collect(),
        energies: results.iter().map(|r| r.energy).collect(),
        converged: results.iter().map(|r| r.converged).collect(),
        nested,
        capacities,
        max_relative_drop,
        slack,
        monotone: max_relative_drop <= slack,
    })
}

/// Index in `fine` of every atom of `coarse`, matched up to `1e-9` relative
/// sup distance; `None` if some atom has no match.
fn embed(coarse: &CompactMesh, fine: &CompactMesh) -> Option<Vec<usize>> {
    let tol = 1e-9 * fine.c2().max(1.0);
    coarse
        .atoms()
        .iter()
        .map(|p| fine.atoms().iter().position(|q| p.sup_dist(q) <= tol))
        .collect()
}

/// `n, 2n, 4n, …` cells per side on the rectangle, `levels` meshes.
pub fn doubling_chain(
    lo: TimePoint,
    hi: TimePoint,
    n: usize,
    levels: usize,
) -> Result<Vec<CompactMesh>> {
    (0..levels)
        .map(|l| {
            let m = n << l;
            build_rect_mesh(lo, hi, m, m)
        })
        .collect()
}

/// `n, 3n, 9n, …` cells per side; with odd `n` every cell center reappears
/// at the next level, so the chain is nested.
pub fn triadic_chain(
    lo: TimePoint,
    hi: TimePoint,
    n: usize,
    levels: usize,
) -> Result<Vec<CompactMesh>> {
    (0..levels)
        .map(|l| {
            let m = n * 3usize.pow(l as u32);
            build_rect_mesh(lo, hi, m, m)
        })
        .collect()
}
