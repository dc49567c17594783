//! Monte Carlo estimators for occupation integrals and ε-hitting.
//!
//! Sample `i` of a run seeded with `seed` draws from `seed.substream(i)`.
//! Samples are processed in fixed-size chunks; per-chunk results are
//! collected in chunk order and folded sequentially, so every estimate is
//! bitwise identical across thread counts and execution modes.
//!
//! Standard errors use the plug-in variance (divisor `n`). For 0/1 data this
//! makes the standard error exactly `√(p̂(1 − p̂)/n)`.

use serde::{Deserialize, Serialize};

use crate::capacity::DiscreteMeasure;
use crate::constants::{ConstantSet, ProblemParams};
use crate::domain::{CompactMesh, SpacePoint, TimePoint};
use crate::error::{invalid, Error, Result};
use crate::field::{AdditiveSampler, ExactSampler, FieldSampler, Scratch, SheetSample};
use crate::par::{map_indexed, Execution};
use crate::seed::SeedSpec;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

/// Standard errors of slack used by the bound verdicts.
pub const VERDICT_SIGMAS: f64 = 4.0;

const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
    /// Set when `n_samples == 1`: no spread can be estimated and
    /// `std_error` is zero.
    pub degenerate: bool,
}

impl MCEstimate {
    pub fn from_values(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(invalid("an estimate needs at least one sample"));
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Ok(Self::new(mean, (var / n).sqrt(), xs.len()))
    }

    pub fn new(mean: f64, std_error: f64, n_samples: usize) -> Self {
        Self {
            mean,
            std_error,
            n_samples,
            ci95_lo: mean - Z95 * std_error,
            ci95_hi: mean + Z95 * std_error,
            degenerate: n_samples == 1,
        }
    }

    pub fn ci_width(&self) -> f64 {
        self.ci95_hi - self.ci95_lo
    }
}

/// Target point `a`, radius `ε` and box radius `M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitQuery {
    pub a: SpacePoint,
    pub eps: f64,
    #[serde(rename = "M")]
    pub m: f64,
}

impl HitQuery {
    pub fn new(a: SpacePoint, eps: f64, m: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(invalid("eps must be positive"));
        }
        if !(m.is_finite() && m > 0.0) {
            return Err(invalid("box radius M must be positive"));
        }
        if a.sup_norm() > m {
            return Err(invalid(format!(
                "target has sup norm {} beyond the box radius {m}",
                a.sup_norm()
            )));
        }
        Ok(Self { a, eps, m })
    }

    /// Target at the origin of `ℝ^d`.
    pub fn at_origin(d: usize, eps: f64, m: f64) -> Result<Self> {
        Self::new(SpacePoint::origin(d)?, eps, m)
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.a.clone(), eps, self.m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub n_samples: usize,
    pub seed: SeedSpec,
    #[serde(default)]
    pub execution: Execution,
}

impl Sampling {
    pub fn new(n_samples: usize, seed: SeedSpec) -> Self {
        Self {
            n_samples,
            seed,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(self, execution: Execution) -> Self {
        Self { execution, ..self }
    }

    fn check(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(invalid("n_samples must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    #[default]
    Sheet,
    Additive,
}

/// Exact sampler of the requested field on `atoms`.
pub fn sampler_for(kind: FieldKind, atoms: &[TimePoint], d: usize) -> Result<Box<dyn FieldSampler>> {
    Ok(match kind {
        FieldKind::Sheet => Box::new(ExactSampler::new(atoms, d)?),
        FieldKind::Additive => Box::new(AdditiveSampler::new(atoms, d)?),
    })
}

/// Runs `step` on every draw and returns one accumulator per chunk, in chunk
/// order.
pub fn fold_draws<A, I, S>(
    sampler: &dyn FieldSampler,
    sampling: &Sampling,
    init: I,
    step: S,
) -> Vec<A>
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    S: Fn(&mut A, &[f64]) + Sync + Send,
{
    let n = sampling.n_samples;
    let width = sampler.atoms().len() * sampler.dim();
    map_indexed(n.div_ceil(CHUNK), sampling.execution, |c| {
        let mut acc = init();
        let mut scratch = Scratch::default();
        let mut values = vec![0.0; width];
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            let mut rng = sampling.seed.substream(i as u64).rng();
            sampler.draw_into(&mut rng, &mut scratch, &mut values);
            step(&mut acc, &values);
        }
        acc
    })
}

/// One statistic per draw, in sample order.
pub fn map_draws<T, F>(sampler: &dyn FieldSampler, sampling: &Sampling, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync + Send,
{
    fold_draws(sampler, sampling, Vec::new, |acc, v| acc.push(f(v)))
        .into_iter()
        .flatten()
        .collect()
}

fn occupation(values: &[f64], d: usize, weights: &[f64], q: &HitQuery) -> f64 {
    weights
        .iter()
        .zip(values.chunks_exact(d))
        .filter(|(_, x)| q.a.sup_dist_to(x) <= q.eps)
        .map(|(w, _)| w)
        .sum()
}

fn hits(values: &[f64], d: usize, q: &HitQuery) -> bool {
    values.chunks_exact(d).any(|x| q.a.sup_dist_to(x) <= q.eps)
}

fn check_query_dim(q: &HitQuery, d: usize) -> Result<()> {
    if q.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: q.dim(),
        });
    }
    Ok(())
}

fn check_measure(mesh: &CompactMesh, m: &DiscreteMeasure) -> Result<()> {
    if m.len() != mesh.len() {
        return Err(Error::DimensionMismatch {
            expected: mesh.len(),
            got: m.len(),
        });
    }
    Ok(())
}

/// `Σᵢ wᵢ · 1{|B(tᵢ) − a| ≤ ε}` for one realization.
pub fn occupation_integral(sample: &SheetSample, m: &DiscreteMeasure, q: &HitQuery) -> Result<f64> {
    if sample.len() != m.len() {
        return Err(Error::DimensionMismatch {
            expected: sample.len(),
            got: m.len(),
        });
    }
    check_query_dim(q, sample.dim())?;
    Ok(occupation(sample.values(), sample.dim(), m.weights(), q))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanOccupation {
    pub estimate: MCEstimate,
    /// `c3 ε^d` with the exponent-`d` constant.
    pub lower_bound: f64,
    /// `c3 ε^d` with the exponent-`d/2` constant.
    pub lower_bound_half_power: f64,
    /// Smaller of the two bounds; the verdict uses this one.
    pub weaker_bound: f64,
    pub pass: bool,
}

/// MC mean of the occupation integral, compared against `c3 ε^d`.
pub fn estimate_mean_occupation(
    mesh: &CompactMesh,
    m: &DiscreteMeasure,
    q: &HitQuery,
    d: usize,
    sampling: &Sampling,
) -> Result<MeanOccupation> {
    check_box(q)?;
    let xs = occupation_draws(mesh, m, q, d, sampling)?;
    mean_occupation_from(&xs, &constants_for(mesh, d, q)?, q, d)
}

fn check_box(q: &HitQuery) -> Result<()> {
    if q.eps >= q.m {
        return Err(invalid("the mean-occupation bound needs eps < M"));
    }
    Ok(())
}

fn constants_for(mesh: &CompactMesh, d: usize, q: &HitQuery) -> Result<ConstantSet> {
    Ok(ConstantSet::compute(&ProblemParams::from_mesh(mesh, d, q.m)?))
}

fn mean_occupation_from(xs: &[f64], k: &ConstantSet, q: &HitQuery, d: usize) -> Result<MeanOccupation> {
    let scale = q.eps.powi(d as i32);
    let estimate = MCEstimate::from_values(xs)?;
    let weaker_bound = k.c3_lower() * scale;
    Ok(MeanOccupation {
        pass: estimate.mean + VERDICT_SIGMAS * estimate.std_error >= weaker_bound,
        estimate,
        lower_bound: k.c3 * scale,
        lower_bound_half_power: k.c3_half_power * scale,
        weaker_bound,
    })
}

fn occupation_draws(
    mesh: &CompactMesh,
    m: &DiscreteMeasure,
    q: &HitQuery,
    d: usize,
    sampling: &Sampling,
) -> Result<Vec<f64>> {
    check_measure(mesh, m)?;
    check_query_dim(q, d)?;
    sampling.check()?;
    let sampler = ExactSampler::new(mesh.atoms(), d)?;
    let w = m.weights();
    Ok(map_draws(&sampler, sampling, |v| occupation(v, d, w, q)))
}

/// `c4 ε^d ΣΣ wᵢ wⱼ (1 ∧ ε/√|tᵢ − tⱼ|)^d`, by exact double sum.
pub fn second_moment_bound(
    mesh: &CompactMesh,
    m: &DiscreteMeasure,
    d: usize,
    eps: f64,
    c4: f64,
) -> Result<f64> {
    check_measure(mesh, m)?;
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    let atoms = mesh.atoms();
    let w = m.weights();
    let mut total = 0.0;
    for (p, wi) in atoms.iter().zip(w) {
        let row: f64 = atoms
            .iter()
            .zip(w)
            .map(|(q, wj)| wj * (eps / eps.max(p.sup_dist(q).sqrt())).powi(d as i32))
            .sum();
        total += wi * row;
    }
    Ok(c4 * eps.powi(d as i32) * total)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SecondMoment {
    pub estimate: MCEstimate,
    pub upper_bound: f64,
    pub pass: bool,
}

/// MC mean of the squared occupation integral, compared against the
/// second-moment bound.
pub fn estimate_second_moment(
    mesh: &CompactMesh,
    m: &DiscreteMeasure,
    q: &HitQuery,
    d: usize,
    sampling: &Sampling,
) -> Result<SecondMoment> {
    let xs = occupation_draws(mesh, m, q, d, sampling)?;
    second_moment_from(&xs, mesh, m, q, d, &constants_for(mesh, d, q)?)
}

fn second_moment_from(
    xs: &[f64],
    mesh: &CompactMesh,
    m: &DiscreteMeasure,
    q: &HitQuery,
    d: usize,
    k: &ConstantSet,
) -> Result<SecondMoment> {
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let estimate = MCEstimate::from_values(&sq)?;
    let upper_bound = second_moment_bound(mesh, m, d, q.eps, k.c4)?;
    Ok(SecondMoment {
        pass: estimate.mean - VERDICT_SIGMAS * estimate.std_error <= upper_bound,
        estimate,
        upper_bound,
    })
}

/// All three occupation checks from one set of draws.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OccupationMoments {
    pub mean: MeanOccupation,
    pub second: SecondMoment,
    pub paley_zygmund: PaleyZygmund,
}

pub fn estimate_occupation_moments(
    mesh: &CompactMesh,
    m: &DiscreteMeasure,
    q: &HitQuery,
    d: usize,
    sampling: &Sampling,
) -> Result<OccupationMoments> {
    check_box(q)?;
    let xs = occupation_draws(mesh, m, q, d, sampling)?;
    let k = constants_for(mesh, d, q)?;
    Ok(OccupationMoments {
        mean: mean_occupation_from(&xs, &k, q, d)?,
        second: second_moment_from(&xs, mesh, m, q, d, &k)?,
        paley_zygmund: paley_zygmund_from_values(&xs)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PaleyZygmund {
    /// `P̂(I > 0)`.
    pub positive: MCEstimate,
    pub first_moment: MCEstimate,
    pub second_moment: MCEstimate,
    /// `(Ê I)² / Ê[I²]`.
    pub rhs: f64,
    /// Delta-method standard error of `P̂(I > 0) − rhs`.
    pub combined_std_error: f64,
    /// `P̂(I > 0) − rhs`.
    pub margin: f64,
    pub pass: bool,
}

/// Paley–Zygmund check from per-draw values of a nonnegative variable.
pub fn paley_zygmund_from_values(xs: &[f64]) -> Result<PaleyZygmund> {
    if xs.iter().any(|x| !(*x >= 0.0)) {
        return Err(invalid("Paley–Zygmund needs a nonnegative variable"));
    }
    let pos: Vec<f64> = xs.iter().map(|x| if *x > 0.0 { 1.0 } else { 0.0 }).collect();
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let positive = MCEstimate::from_values(&pos)?;
    let first_moment = MCEstimate::from_values(xs)?;
    let second_moment = MCEstimate::from_values(&sq)?;
    let (p, m, s) = (positive.mean, first_moment.mean, second_moment.mean);
    let (rhs, combined_std_error) = if s > 0.0 {
        let n = xs.len() as f64;
        // influence of P̂ − m̂²/ŝ on one draw
        let var = xs
            .iter()
            .zip(&pos)
            .zip(&sq)
            .map(|((x, xp), x2)| {
                ((xp - p) - 2.0 * m / s * (x - m) + m * m / (s * s) * (x2 - s)).powi(2)
            })
            .sum::<f64>()
            / n;
        (m * m / s, (var / n).sqrt())
    } else {
        (0.0, positive.std_error)
    };
    let margin = p - rhs;
    Ok(PaleyZygmund {
        positive,
        first_moment,
        second_moment,
        rhs,
        combined_std_error,
        margin,
        pass: margin + VERDICT_SIGMAS * combined_std_error >= 0.0,
    })
}

/// `P(I > 0) ≥ (E I)² / E[I²]` for the occupation integral, all three
/// quantities from one sample set.
pub fn paley_zygmund_check(
    mesh: &CompactMesh,
    m: &DiscreteMeasure,
    q: &HitQuery,
    d: usize,
    sampling: &Sampling,
) -> Result<PaleyZygmund> {
    paley_zygmund_from_values(&occupation_draws(mesh, m, q, d, sampling)?)
}

/// Meshes coarser than `ε²` can miss hits between atoms.
pub fn mesh_too_coarse(mesh: &CompactMesh, eps: f64) -> bool {
    mesh.mesh_gauge() > eps * eps
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HitEstimate {
    pub field: FieldKind,
    pub estimate: MCEstimate,
    /// See [`mesh_too_coarse`].
    pub coarse_mesh_warning: bool,
}

/// Fraction of draws with `minᵢ |Z(tᵢ) − a| ≤ ε`.
pub fn estimate_hit_probability(
    mesh: &CompactMesh,
    q: &HitQuery,
    d: usize,
    sampling: &Sampling,
    field: FieldKind,
) -> Result<HitEstimate> {
    check_query_dim(q, d)?;
    sampling.check()?;
    let sampler = sampler_for(field, mesh.atoms(), d)?;
    let xs = map_draws(sampler.as_ref(), sampling, |v| {
        if hits(v, d, q) {
            1.0
        } else {
            0.0
        }
    });
    Ok(HitEstimate {
        field,
        estimate: MCEstimate::from_values(&xs)?,
        coarse_mesh_warning: mesh_too_coarse(mesh, q.eps),
    })
}

/// Hit indicators for several radii from the same draws; entry `k` of each
/// row belongs to `eps[k]`.
pub fn estimate_hit_curve(
    mesh: &CompactMesh,
    a: &SpacePoint,
    eps: &[f64],
    d: usize,
    sampling: &Sampling,
    field: FieldKind,
) -> Result<Vec<MCEstimate>> {
    if a.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: a.dim(),
        });
    }
    sampling.check()?;
    let sampler = sampler_for(field, mesh.atoms(), d)?;
    let dists = map_draws(sampler.as_ref(), sampling, |v| {
        v.chunks_exact(d)
            .map(|x| a.sup_dist_to(x))
            .fold(f64::INFINITY, f64::min)
    });
    eps.iter()
        .map(|e| {
            let xs: Vec<f64> = dists
                .iter()
                .map(|r| if *r <= *e { 1.0 } else { 0.0 })
                .collect();
            MCEstimate::from_values(&xs)
        })
        .collect()
}

/// Lebesgue measure of the union of occupied cells of the uniform
/// `grid_res^d` partition of `[−M, M]^d`, averaged over draws.
///
/// Only cells containing some `B(tᵢ)` count, so this is biased low for the
/// image measure `E[Leb(B(E) ∩ [−M, M]^d)]`.
pub fn estimate_image_measure(
    mesh: &CompactMesh,
    d: usize,
    m: f64,
    grid_res: usize,
    sampling: &Sampling,
) -> Result<MCEstimate> {
    if !(m.is_finite() && m > 0.0) {
        return Err(invalid("box radius M must be positive"));
    }
    if grid_res == 0 {
        return Err(invalid("grid_res must be positive"));
    }
    if (grid_res as u64).checked_pow(d as u32).is_none() {
        return Err(invalid("grid_res^d overflows the cell index"));
    }
    sampling.check()?;
    let sampler = ExactSampler::new(mesh.atoms(), d)?;
    let cell = 2.0 * m / grid_res as f64;
    let volume = cell.powi(d as i32);
    let xs = map_draws(&sampler, sampling, |v| {
        let mut cells: Vec<u64> = v
            .chunks_exact(d)
            .filter(|x| x.iter().all(|c| c.abs() <= m))
            .map(|x| {
                x.iter().fold(0u64, |acc, c| {
                    let k = (((c + m) / cell) as usize).min(grid_res - 1);
                    acc * grid_res as u64 + k as u64
                })
            })
            .collect();
        cells.sort_unstable();
        cells.dedup();
        cells.len() as f64 * volume
    });
    MCEstimate::from_values(&xs)
}

/// Entrywise second moments `E[Xᵢ Xⱼ]` of a centered field over all
/// `(atom, coordinate)` pairs, with per-entry standard errors.
///
/// Index `i * d + k` addresses coordinate `k` at atom `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceEstimate {
    pub size: usize,
    pub n_samples: usize,
    pub cov: Vec<f64>,
    pub std_error: Vec<f64>,
}

impl CovarianceEstimate {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.size + j]
    }

    pub fn se(&self, i: usize, j: usize) -> f64 {
        self.std_error[i * self.size + j]
    }

    /// Largest `|ĉᵢⱼ − cᵢⱼ| / seᵢⱼ` over the upper triangle. Entries with zero
    /// standard error must match exactly, else the result is infinite.
    pub fn max_abs_z(&self, closed_form: impl Fn(usize, usize) -> f64) -> f64 {
        self.max_z_by(|i, j| (self.get(i, j) - closed_form(i, j), self.se(i, j)))
    }

    /// Largest two-sample `|z|` against another estimate of the same size.
    pub fn max_abs_z_between(&self, other: &CovarianceEstimate) -> Result<f64> {
        if self.size != other.size {
            return Err(Error::DimensionMismatch {
                expected: self.size,
                got: other.size,
            });
        }
        Ok(self.max_z_by(|i, j| {
            (
                self.get(i, j) - other.get(i, j),
                self.se(i, j).hypot(other.se(i, j)),
            )
        }))
    }

    fn max_z_by(&self, diff_se: impl Fn(usize, usize) -> (f64, f64)) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.size {
            for j in i..self.size {
                let (diff, se) = diff_se(i, j);
                let z = if se > 0.0 {
                    diff.abs() / se
                } else if diff == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                worst = worst.max(z);
            }
        }
        worst
    }
}

struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

/// Known-mean (zero) covariance estimate of a sampler's output.
pub fn estimate_covariance(
    sampler: &dyn FieldSampler,
    sampling: &Sampling,
) -> Result<CovarianceEstimate> {
    sampling.check()?;
    let size = sampler.atoms().len() * sampler.dim();
    let parts = fold_draws(
        sampler,
        sampling,
        || Moments {
            sum: vec![0.0; size * size],
            sum_sq: vec![0.0; size * size],
        },
        |acc, v| {
            for i in 0..size {
                for j in i..size {
                    let p = v[i] * v[j];
                    acc.sum[i * size + j] += p;
                    acc.sum_sq[i * size + j] += p * p;
                }
            }
        },
    );
    let mut sum = vec![0.0; size * size];
    let mut sum_sq = vec![0.0; size * size];
    for part in &parts {
        for (a, b) in sum.iter_mut().zip(&part.sum) {
            *a += b;
        }
        for (a, b) in sum_sq.iter_mut().zip(&part.sum_sq) {
            *a += b;
        }
    }
    let n = sampling.n_samples as f64;
    let mut cov = vec![0.0; size * size];
    let mut std_error = vec![0.0; size * size];
    for i in 0..size {
        for j in i..size {
            let mean = sum[i * size + j] / n;
            let var = (sum_sq[i * size + j] / n - mean * mean).max(0.0);
            for (a, b) in [(i, j), (j, i)] {
                cov[a * size + b] = mean;
                std_error[a * size + b] = (var / n).sqrt();
            }
        }
    }
    Ok(CovarianceEstimate {
        size,
        n_samples: sampling.n_samples,
        cov,
        std_error,
    })
}
