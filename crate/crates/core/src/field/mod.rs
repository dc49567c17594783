//! Gaussian simulation of the `(2,d)`-Brownian sheet and relatives.
//!
//! The sheet `B` is the centred Gaussian field on `[0, ∞)²` with independent
//! coordinates and covariance `(s1 ∧ t1)(s2 ∧ t2)` per coordinate. Samplers
//! here are exact in law at the requested points:
//!
//! * [`ExactSampler`] factorizes the covariance over a point set;
//! * [`sample_grid_chentsov`] integrates white noise over grid cells;
//! * [`Ord1Sampler`] and [`Ord2Sampler`] assemble the sheet beyond a fixed
//!   time from independent pieces (a frozen value, Brownian motions, a
//!   Brownian bridge and a fresh sheet);
//! * [`AdditiveSampler`] draws `Z(s, t) = X(s) + Y(t)`.
//!
//! All samplers implement [`FieldSampler`] and are pure given a [`SeedSpec`].

mod decompose;
mod gaussian;

use std::io::Write;

use rand::Rng as _;
use rand_chacha::ChaCha8Rng;

use crate::domain::{CompactMesh, SpacePoint, TimePoint};
use crate::error::{invalid, Error, Result};
use crate::seed::SeedSpec;

pub use decompose::{sample_bridge, Ord1Sampler, Ord2Sampler};
pub use gaussian::{BrownianTimes, GaussianFactor};

/// Per-coordinate covariance of the sheet at `p` and `q`.
pub fn sheet_covariance(p: &TimePoint, q: &TimePoint) -> f64 {
    p.s1.min(q.s1) * p.s2.min(q.s2)
}

/// Per-coordinate covariance of additive Brownian motion at `p` and `q`.
pub fn additive_covariance(p: &TimePoint, q: &TimePoint) -> f64 {
    p.s1.min(q.s1) + p.s2.min(q.s2)
}

/// Per-coordinate variance of `B(s) − B(t)` for `s ≻₍₁₎ t`.
pub fn increment_variance_ord1(s: &TimePoint, t: &TimePoint) -> Result<f64> {
    if !s.dominates_ord1(t) {
        return Err(Error::Unordered(format!(
            "({}, {}) does not dominate ({}, {}) coordinatewise",
            s.s1, s.s2, t.s1, t.s2
        )));
    }
    Ok(s.s2 * (s.s1 - t.s1) + t.s1 * (s.s2 - t.s2))
}

/// Covariance at `u, v ∈ [0, t2]` of the bridge `V(u) = B(t1, u) − (u/t2) B(t)`.
///
/// Written as `t1 · (u ∧ v)(t2 − u ∨ v) / t2` so the pinned ends are exactly zero.
pub fn bridge_covariance(t: &TimePoint, u: f64, v: f64) -> f64 {
    t.s1 * u.min(v) * (t.s2 - u.max(v)) / t.s2
}

/// One realization of a d-dimensional field at a list of time points.
#[derive(Clone, Debug, PartialEq)]
pub struct SheetSample {
    atoms: Vec<TimePoint>,
    d: usize,
    values: Vec<f64>,
    seed: SeedSpec,
}

impl SheetSample {
    pub fn atoms(&self) -> &[TimePoint] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> SeedSpec {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Coordinates of the field at atom `i`.
    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn space_point(&self, i: usize) -> SpacePoint {
        SpacePoint::new(self.value(i).to_vec()).expect("sampled values are finite")
    }

    /// Flat values, atom-major: `values()[i * d + k]` is coordinate `k` at atom `i`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// CSV with header `s1,s2,x1,..,xd` and one row per atom.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["s1".to_string(), "s2".to_string()];
        header.extend((1..=self.d).map(|k| format!("x{k}")));
        out.write_record(&header)?;
        for (i, p) in self.atoms.iter().enumerate() {
            let mut row = vec![p.s1.to_string(), p.s2.to_string()];
            row.extend(self.value(i).iter().map(f64::to_string));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// A Gaussian field sampler with precomputed state.
pub trait FieldSampler: Sync {
    fn atoms(&self) -> &[TimePoint];

    fn dim(&self) -> usize;

    /// Writes one draw into `out` (length `atoms().len() * dim()`, atom-major).
    fn draw_into(&self, rng: &mut ChaCha8Rng, scratch: &mut Scratch, out: &mut [f64]);

    fn draw(&self, seed: SeedSpec) -> SheetSample {
        let mut values = vec![0.0; self.atoms().len() * self.dim()];
        self.draw_into(&mut seed.rng(), &mut Scratch::default(), &mut values);
        SheetSample {
            atoms: self.atoms().to_vec(),
            d: self.dim(),
            values,
            seed,
        }
    }
}

/// Reusable buffers for repeated draws.
#[derive(Default, Debug)]
pub struct Scratch {
    z: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(invalid("dimension d must be at least 1"));
    }
    Ok(())
}

/// Exact sheet sampler on an arbitrary point set via a Cholesky factor of the
/// covariance matrix. Coordinates are drawn one after another, each from a
/// fresh block of standard normals.
#[derive(Clone, Debug)]
pub struct ExactSampler {
    atoms: Vec<TimePoint>,
    d: usize,
    factor: GaussianFactor,
}

impl ExactSampler {
    pub fn new(atoms: &[TimePoint], d: usize) -> Result<Self> {
        check_dim(d)?;
        let factor = GaussianFactor::new(atoms.len(), |i, j| sheet_covariance(&atoms[i], &atoms[j]))?;
        Ok(Self {
            atoms: atoms.to_vec(),
            d,
            factor,
        })
    }

    pub fn jitter(&self) -> f64 {
        self.factor.jitter()
    }
}

impl FieldSampler for ExactSampler {
    fn atoms(&self) -> &[TimePoint] {
        &self.atoms
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn draw_into(&self, rng: &mut ChaCha8Rng, scratch: &mut Scratch, out: &mut [f64]) {
        for k in 0..self.d {
            self.factor
                .draw_strided(rng, &mut scratch.z, &mut out[k..], self.d);
        }
    }
}

pub fn sample_exact(mesh: &CompactMesh, d: usize, seed: SeedSpec) -> Result<SheetSample> {
    Ok(ExactSampler::new(mesh.atoms(), d)?.draw(seed))
}

/// Additive Brownian motion `Z(s1, s2) = X(s1) + Y(s2)` with independent
/// d-dimensional Brownian motions `X` and `Y`, simulated at the distinct
/// first and second coordinates of the atoms.
#[derive(Clone, Debug)]
pub struct AdditiveSampler {
    atoms: Vec<TimePoint>,
    d: usize,
    first: BrownianTimes,
    second: BrownianTimes,
}

impl AdditiveSampler {
    pub fn new(atoms: &[TimePoint], d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self {
            atoms: atoms.to_vec(),
            d,
            first: BrownianTimes::new(atoms.iter().map(|p| p.s1)),
            second: BrownianTimes::new(atoms.iter().map(|p| p.s2)),
        })
    }
}

impl FieldSampler for AdditiveSampler {
    fn atoms(&self) -> &[TimePoint] {
        &self.atoms
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn draw_into(&self, rng: &mut ChaCha8Rng, scratch: &mut Scratch, out: &mut [f64]) {
        for k in 0..self.d {
            self.first.draw(rng, &mut scratch.a);
            self.second.draw(rng, &mut scratch.b);
            for i in 0..self.atoms.len() {
                out[i * self.d + k] =
                    self.first.at(&scratch.a, i) + self.second.at(&scratch.b, i);
            }
        }
    }
}

pub fn sample_additive_bm(mesh: &CompactMesh, d: usize, seed: SeedSpec) -> Result<SheetSample> {
    Ok(AdditiveSampler::new(mesh.atoms(), d)?.draw(seed))
}

/// Index of grid node `(i, j)` in a sample from [`sample_grid_chentsov`].
pub fn grid_node_index(n2: usize, i: usize, j: usize) -> usize {
    i * (n2 + 1) + j
}

/// The sheet on the `(n1+1) × (n2+1)` node grid of `[0, t_hi]`, built as
/// two-dimensional cumulative sums of independent cell masses of white noise
/// (variance = cell area). Nodes are listed with `i` (first coordinate)
/// varying slowest; see [`grid_node_index`].
#[derive(Clone, Debug)]
pub struct GridSampler {
    atoms: Vec<TimePoint>,
    n1: usize,
    n2: usize,
    d: usize,
    cell_sd: f64,
}

impl GridSampler {
    pub fn new(t_hi: TimePoint, n1: usize, n2: usize, d: usize) -> Result<Self> {
        check_dim(d)?;
        if n1 == 0 || n2 == 0 {
            return Err(invalid("grid counts must be at least 1"));
        }
        if !(t_hi.s1 > 0.0 && t_hi.s2 > 0.0) {
            return Err(Error::Degenerate(
                "grid corner must have positive coordinates".into(),
            ));
        }
        let h1 = t_hi.s1 / n1 as f64;
        let h2 = t_hi.s2 / n2 as f64;
        let mut atoms = Vec::with_capacity((n1 + 1) * (n2 + 1));
        for i in 0..=n1 {
            for j in 0..=n2 {
                atoms.push(TimePoint::new(i as f64 * h1, j as f64 * h2)?);
            }
        }
        Ok(Self {
            atoms,
            n1,
            n2,
            d,
            cell_sd: (h1 * h2).sqrt(),
        })
    }
}

impl FieldSampler for GridSampler {
    fn atoms(&self) -> &[TimePoint] {
        &self.atoms
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn draw_into(&self, rng: &mut ChaCha8Rng, scratch: &mut Scratch, out: &mut [f64]) {
        let (n1, n2, d) = (self.n1, self.n2, self.d);
        let sheet = &mut scratch.a;
        sheet.clear();
        sheet.resize(self.atoms.len(), 0.0);
        for k in 0..d {
            for i in 1..=n1 {
                for j in 1..=n2 {
                    let xi: f64 = self.cell_sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
                    sheet[grid_node_index(n2, i, j)] = xi
                        + sheet[grid_node_index(n2, i - 1, j)]
                        + sheet[grid_node_index(n2, i, j - 1)]
                        - sheet[grid_node_index(n2, i - 1, j - 1)];
                }
            }
            for (n, v) in sheet.iter().enumerate() {
                out[n * d + k] = *v;
            }
        }
    }
}

pub fn sample_grid_chentsov(
    t_hi: TimePoint,
    n1: usize,
    n2: usize,
    d: usize,
    seed: SeedSpec,
) -> Result<SheetSample> {
    Ok(GridSampler::new(t_hi, n1, n2, d)?.draw(seed))
}

pub fn sample_decomposition_ord1(
    t: TimePoint,
    targets: &[TimePoint],
    d: usize,
    seed: SeedSpec,
) -> Result<SheetSample> {
    Ok(Ord1Sampler::new(t, targets, d)?.draw(seed))
}

pub fn sample_decomposition_ord2(
    t: TimePoint,
    targets: &[TimePoint],
    d: usize,
    seed: SeedSpec,
) -> Result<SheetSample> {
    Ok(Ord2Sampler::new(t, targets, d)?.draw(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_rect_mesh;

    fn tp(s1: f64, s2: f64) -> TimePoint {
        TimePoint::new(s1, s2).unwrap()
    }

    #[test]
    fn covariance_examples() {
        assert_eq!(sheet_covariance(&tp(1.0, 2.0), &tp(2.0, 1.0)), 1.0);
        assert_eq!(sheet_covariance(&tp(1.5, 1.5), &tp(1.5, 1.5)), 2.25);
        assert_eq!(sheet_covariance(&tp(0.0, 5.0), &tp(3.0, 3.0)), 0.0);
    }

    #[test]
    fn increment_variance_examples() {
        assert_eq!(increment_variance_ord1(&tp(2.0, 2.0), &tp(1.0, 1.0)).unwrap(), 3.0);
        assert_eq!(increment_variance_ord1(&tp(1.0, 1.0), &tp(1.0, 1.0)).unwrap(), 0.0);
        assert_eq!(increment_variance_ord1(&tp(1.5, 2.0), &tp(1.0, 1.0)).unwrap(), 2.0);
        assert!(increment_variance_ord1(&tp(2.0, 1.0), &tp(1.0, 2.0)).is_err());
    }

    #[test]
    fn bridge_is_pinned() {
        let t = tp(1.0, 2.0);
        assert_eq!(bridge_covariance(&t, 0.0, 0.0), 0.0);
        assert_eq!(bridge_covariance(&t, 2.0, 2.0), 0.0);
        assert_eq!(bridge_covariance(&t, 1.0, 1.0), 0.5);
    }

    #[test]
    fn exact_sampler_is_deterministic() {
        let m = build_rect_mesh(tp(1.0, 1.0), tp(2.0, 2.0), 3, 3).unwrap();
        let a = sample_exact(&m, 2, SeedSpec::new(11, 4)).unwrap();
        let b = sample_exact(&m, 2, SeedSpec::new(11, 4)).unwrap();
        assert_eq!(a.values(), b.values());
        let c = sample_exact(&m, 2, SeedSpec::new(11, 5)).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn grid_axes_are_zero() {
        let s = sample_grid_chentsov(tp(2.0, 3.0), 4, 5, 2, SeedSpec::new(1, 1)).unwrap();
        for (i, p) in s.atoms().iter().enumerate() {
            if p.s1 == 0.0 || p.s2 == 0.0 {
                assert_eq!(s.value(i), &[0.0, 0.0]);
            }
        }
        assert_eq!(s.len(), 30);
        assert_eq!(s.atoms()[grid_node_index(5, 4, 5)], tp(2.0, 3.0));
    }

    #[test]
    fn additive_origin_is_zero() {
        let atoms = [tp(0.0, 0.0), tp(1.0, 2.0)];
        let s = AdditiveSampler::new(&atoms, 3).unwrap().draw(SeedSpec::new(5, 0));
        assert_eq!(s.value(0), &[0.0; 3]);
        assert!(s.value(1).iter().all(|v| *v != 0.0));
    }

    #[test]
    fn csv_layout() {
        let m = build_rect_mesh(tp(1.0, 1.0), tp(2.0, 2.0), 1, 2).unwrap();
        let s = sample_exact(&m, 2, SeedSpec::new(1, 0)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "s1,s2,x1,x2");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1.5,1.25,"));
    }

    #[test]
    fn rejects_zero_dimension() {
        assert!(ExactSampler::new(&[tp(1.0, 1.0)], 0).is_err());
    }
}
