//! The sheet beyond a fixed time `t`, rebuilt from independent pieces.
//!
//! For targets `s ≻₍₁₎ t` (white noise split over the four sub-rectangles of
//! `[0, s1] × [0, s2]`):
//!
//! ```text
//! B(s) = B(t) + √t2 · β₁(s1 − t1) + √t1 · β₂(s2 − t2) + W(s − t)
//! ```
//!
//! with Brownian motions `β₁`, `β₂` and a sheet `W`. For targets `s ≻₍₂₎ t`:
//!
//! ```text
//! B(s) = V(s2) + U(s) + (s2 / t2) · B(t)
//! ```
//!
//! where `V(u) = B(t1, u) − (u/t2) B(t)` is a Brownian bridge on `[0, t2]`
//! scaled by `t1` and `U(s)` is the white-noise mass of `[t1, s1] × [0, s2]`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{
    bridge_covariance, check_dim, sheet_covariance, BrownianTimes, FieldSampler, GaussianFactor,
    Scratch,
};
use crate::domain::TimePoint;
use crate::error::{Error, Result};
use crate::seed::SeedSpec;

/// Atoms of a decomposition sample: `t` first, then the targets in order.
fn with_anchor(t: TimePoint, targets: &[TimePoint]) -> Vec<TimePoint> {
    std::iter::once(t).chain(targets.iter().copied()).collect()
}

/// Draws the frozen value `B(t)` coordinate `k` into atom 0.
fn draw_anchor(t: &TimePoint, rng: &mut ChaCha8Rng) -> f64 {
    (t.s1 * t.s2).sqrt() * rng.sample::<f64, _>(StandardNormal)
}

#[derive(Clone, Debug)]
pub struct Ord1Sampler {
    t: TimePoint,
    atoms: Vec<TimePoint>,
    d: usize,
    beta1: BrownianTimes,
    beta2: BrownianTimes,
    fresh: GaussianFactor,
}

impl Ord1Sampler {
    pub fn new(t: TimePoint, targets: &[TimePoint], d: usize) -> Result<Self> {
        check_dim(d)?;
        if let Some(s) = targets.iter().find(|s| !s.dominates_ord1(&t)) {
            return Err(Error::Unordered(format!(
                "target ({}, {}) is not ≻₍₁₎ ({}, {})",
                s.s1, s.s2, t.s1, t.s2
            )));
        }
        let shifted: Vec<TimePoint> = targets
            .iter()
            .map(|s| TimePoint {
                s1: s.s1 - t.s1,
                s2: s.s2 - t.s2,
            })
            .collect();
        let fresh = GaussianFactor::new(shifted.len(), |i, j| {
            sheet_covariance(&shifted[i], &shifted[j])
        })?;
        Ok(Self {
            t,
            atoms: with_anchor(t, targets),
            d,
            beta1: BrownianTimes::new(shifted.iter().map(|p| p.s1)),
            beta2: BrownianTimes::new(shifted.iter().map(|p| p.s2)),
            fresh,
        })
    }
}

impl FieldSampler for Ord1Sampler {
    fn atoms(&self) -> &[TimePoint] {
        &self.atoms
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn draw_into(&self, rng: &mut ChaCha8Rng, scratch: &mut Scratch, out: &mut [f64]) {
        let d = self.d;
        let n = self.atoms.len() - 1;
        let (r1, r2) = (self.t.s2.sqrt(), self.t.s1.sqrt());
        scratch.c.resize(n, 0.0);
        for k in 0..d {
            let anchor = draw_anchor(&self.t, rng);
            self.beta1.draw(rng, &mut scratch.a);
            self.beta2.draw(rng, &mut scratch.b);
            self.fresh.draw_strided(rng, &mut scratch.z, &mut scratch.c, 1);
            out[k] = anchor;
            for q in 0..n {
                out[(q + 1) * d + k] = anchor
                    + r1 * self.beta1.at(&scratch.a, q)
                    + r2 * self.beta2.at(&scratch.b, q)
                    + scratch.c[q];
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Ord2Sampler {
    t: TimePoint,
    atoms: Vec<TimePoint>,
    d: usize,
    bridge_slot: Vec<usize>,
    bridge: GaussianFactor,
    strip: GaussianFactor,
}

impl Ord2Sampler {
    pub fn new(t: TimePoint, targets: &[TimePoint], d: usize) -> Result<Self> {
        check_dim(d)?;
        if t.s2 <= 0.0 {
            return Err(Error::Degenerate(
                "the ≻₍₂₎ decomposition needs t2 > 0".into(),
            ));
        }
        if let Some(s) = targets.iter().find(|s| !s.dominates_ord2(&t)) {
            return Err(Error::Unordered(format!(
                "target ({}, {}) is not ≻₍₂₎ ({}, {})",
                s.s1, s.s2, t.s1, t.s2
            )));
        }
        let mut levels: Vec<f64> = targets.iter().map(|s| s.s2).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let bridge_slot = targets
            .iter()
            .map(|s| levels.binary_search_by(|u| u.total_cmp(&s.s2)).unwrap())
            .collect();
        let bridge = GaussianFactor::new(levels.len(), |i, j| {
            bridge_covariance(&t, levels[i], levels[j])
        })?;
        let strip_points: Vec<TimePoint> = targets
            .iter()
            .map(|s| TimePoint {
                s1: s.s1 - t.s1,
                s2: s.s2,
            })
            .collect();
        let strip = GaussianFactor::new(strip_points.len(), |i, j| {
            sheet_covariance(&strip_points[i], &strip_points[j])
        })?;
        Ok(Self {
            t,
            atoms: with_anchor(t, targets),
            d,
            bridge_slot,
            bridge,
            strip,
        })
    }
}

impl FieldSampler for Ord2Sampler {
    fn atoms(&self) -> &[TimePoint] {
        &self.atoms
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn draw_into(&self, rng: &mut ChaCha8Rng, scratch: &mut Scratch, out: &mut [f64]) {
        let d = self.d;
        let n = self.atoms.len() - 1;
        scratch.a.resize(self.bridge.len(), 0.0);
        scratch.c.resize(n, 0.0);
        for k in 0..d {
            let anchor = draw_anchor(&self.t, rng);
            self.bridge.draw_strided(rng, &mut scratch.z, &mut scratch.a, 1);
            self.strip.draw_strided(rng, &mut scratch.z, &mut scratch.c, 1);
            out[k] = anchor;
            for q in 0..n {
                let s2 = self.atoms[q + 1].s2;
                out[(q + 1) * d + k] = scratch.a[self.bridge_slot[q]]
                    + scratch.c[q]
                    + (s2 / self.t.s2) * anchor;
            }
        }
    }
}

/// The bridge `V` of the ≻₍₂₎ decomposition at the given levels in `[0, t2]`;
/// returns `levels.len() × d` values, level-major. Levels `0` and `t2` are
/// exactly zero.
pub fn sample_bridge(t: TimePoint, levels: &[f64], d: usize, seed: SeedSpec) -> Result<Vec<f64>> {
    check_dim(d)?;
    if t.s2 <= 0.0 {
        return Err(Error::Degenerate("bridge needs t2 > 0".into()));
    }
    if levels.iter().any(|u| !(0.0..=t.s2).contains(u)) {
        return Err(crate::error::invalid("bridge levels must lie in [0, t2]"));
    }
    let factor = GaussianFactor::new(levels.len(), |i, j| {
        bridge_covariance(&t, levels[i], levels[j])
    })?;
    let mut out = vec![0.0; levels.len() * d];
    let mut rng = seed.rng();
    let mut z = Vec::new();
    for k in 0..d {
        factor.draw_strided(&mut rng, &mut z, &mut out[k..], d);
    }
    Ok(out)
}
