//! Explicit constants of the hitting-probability sandwich.
//!
//! Everything here is a closed-form function of the dimension `d`, the box
//! radius `M` (targets `a ∈ [−M, M]^d`) and the radii `c1 = min |t|`,
//! `c2 = max |t|` of the time set.
//!
//! Two constants come in two versions. `c3` has a variant with exponent `d/2`
//! on the leading factor, and the upper constant has a variant
//! `256·c4 / (c5² ∧ c6²)` built from the lemma constants. Both versions are
//! reported, and [`ConstantSet::lower`] / [`ConstantSet::upper`] pick the
//! weaker one of each pair.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::domain::CompactMesh;
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub d: usize,
    /// Box radius `M`.
    #[serde(rename = "M")]
    pub m: f64,
    pub c1: f64,
    pub c2: f64,
}

impl ProblemParams {
    pub fn new(d: usize, m: f64, c1: f64, c2: f64) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension d must be at least 1"));
        }
        if !(m.is_finite() && m > 0.0) {
            return Err(invalid("box radius M must be positive"));
        }
        if !(c1.is_finite() && c1 > 0.0) {
            return Err(invalid("c1 must be positive"));
        }
        if !(c2.is_finite() && c2 >= c1) {
            return Err(invalid("c2 must be finite and at least c1"));
        }
        Ok(Self { d, m, c1, c2 })
    }

    /// Parameters read off a mesh; fails if the mesh touches the origin
    /// (`c1 = 0`).
    pub fn from_mesh(mesh: &CompactMesh, d: usize, m: f64) -> Result<Self> {
        Self::new(d, m, mesh.c1(), mesh.c2())
    }

    fn df(&self) -> f64 {
        self.d as f64
    }
}

/// `(c3, c4, c5, c6)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaConstants {
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
}

/// `(A1, …, A5)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
}

/// Mean-occupation constant with exponent `d` on `2 / (π c2²)`.
pub fn c3(p: &ProblemParams) -> f64 {
    (2.0 / (PI * p.c2 * p.c2)).powf(p.df()) * (-2.0 * p.df() * p.m * p.m / (p.c1 * p.c1)).exp()
}

/// Variant of [`c3`] with exponent `d/2` on the leading factor.
pub fn c3_half_power(p: &ProblemParams) -> f64 {
    (2.0 / (PI * p.c2 * p.c2)).powf(p.df() / 2.0)
        * (-2.0 * p.df() * p.m * p.m / (p.c1 * p.c1)).exp()
}

pub fn compute_lemma_constants(p: &ProblemParams) -> LemmaConstants {
    let d = p.df();
    LemmaConstants {
        c3: c3(p),
        c4: 2.0 * (4.0 / PI).powf(d) * p.c1.min(1.0).powf(-1.5 * d),
        c5: (2.0 / (E * PI)).powf(d) * (2.0 * p.c2).max(1.0).powf(-d / 2.0),
        c6: (2.0 / PI).powf(d)
            * (2f64.powf(1.5) * p.c2).max(1.0).powf(-d / 2.0)
            * (-d * (p.m * p.m + 1.0)).exp(),
    }
}

pub fn compute_theorem_constants(p: &ProblemParams) -> TheoremConstants {
    let d = p.df();
    let a5 = p.c1.min(1.0).powf(1.5 * d);
    let a3 = (-2.0 * d).exp() * (2.0 * p.c2).min(1.0).powf(-d);
    let a4 = (2f64.powf(1.5) * p.c2).min(1.0).powf(-d) * (-2.0 * d * (p.m * p.m + 1.0)).exp();
    let a1 = a5 / 2.0
        * PI.powf(-d)
        * p.c2.powf(-4.0 * d)
        * (-4.0 * d * p.m * p.m / (p.c1 * p.c1)).exp();
    let a2 = 512.0 / a5 * (2.0 / PI).powf(-d) / a3.min(a4);
    TheoremConstants { a1, a2, a3, a4, a5 }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantSet {
    pub c3: f64,
    pub c3_half_power: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    #[serde(rename = "A1")]
    pub a1: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    #[serde(rename = "A3")]
    pub a3: f64,
    #[serde(rename = "A4")]
    pub a4: f64,
    #[serde(rename = "A5")]
    pub a5: f64,
    /// `c3² / c4`.
    #[serde(rename = "alt_A1")]
    pub alt_a1: f64,
    /// `256·c4 / (c5² ∧ c6²)`.
    #[serde(rename = "alt_A2")]
    pub alt_a2: f64,
}

impl ConstantSet {
    pub fn compute(p: &ProblemParams) -> Self {
        let l = compute_lemma_constants(p);
        let t = compute_theorem_constants(p);
        Self {
            c3: l.c3,
            c3_half_power: c3_half_power(p),
            c4: l.c4,
            c5: l.c5,
            c6: l.c6,
            a1: t.a1,
            a2: t.a2,
            a3: t.a3,
            a4: t.a4,
            a5: t.a5,
            alt_a1: l.c3 * l.c3 / l.c4,
            alt_a2: 256.0 * l.c4 / (l.c5 * l.c5).min(l.c6 * l.c6),
        }
    }

    /// Weaker lower constant: `min(A1, alt_A1)`.
    pub fn lower(&self) -> f64 {
        self.a1.min(self.alt_a1)
    }

    /// Weaker upper constant: `max(A2, alt_A2)`.
    pub fn upper(&self) -> f64 {
        self.a2.max(self.alt_a2)
    }

    /// Weaker of the two `c3` versions.
    pub fn c3_lower(&self) -> f64 {
        self.c3.min(self.c3_half_power)
    }

    fn all(&self) -> [f64; 12] {
        [
            self.c3,
            self.c3_half_power,
            self.c4,
            self.c5,
            self.c6,
            self.a1,
            self.a2,
            self.a3,
            self.a4,
            self.a5,
            self.alt_a1,
            self.alt_a2,
        ]
    }

    pub fn all_positive_finite(&self) -> bool {
        self.all().iter().all(|v| v.is_finite() && *v > 0.0)
    }
}

/// One stated constant next to its derived counterpart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub stated: f64,
    pub derived: f64,
    /// `derived / stated`.
    pub ratio: f64,
    /// `|derived − stated| / stated`.
    pub relative_deviation: f64,
}

impl Relation {
    fn new(stated: f64, derived: f64) -> Self {
        Self {
            stated,
            derived,
            ratio: derived / stated,
            relative_deviation: (derived - stated).abs() / stated,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub params: ProblemParams,
    /// `A1` against `c3² / c4`.
    pub lower: Relation,
    /// `A2` against `256·c4 / (c5² ∧ c6²)`.
    pub upper: Relation,
    /// `c3` against its half-power variant.
    pub c3: Relation,
    /// `A1 ≤ A2`; reported, not enforced.
    pub ordered: bool,
}

pub fn cross_check_relations(p: &ProblemParams) -> RelationReport {
    let k = ConstantSet::compute(p);
    RelationReport {
        params: *p,
        lower: Relation::new(k.a1, k.alt_a1),
        upper: Relation::new(k.a2, k.alt_a2),
        c3: Relation::new(k.c3, k.c3_half_power),
        ordered: k.a1 <= k.a2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference() -> ProblemParams {
        ProblemParams::new(1, 2.0, 1.0, 2.0).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn lemma_constants_reference_values() {
        let l = compute_lemma_constants(&reference());
        // 2 · 4/π
        assert!(rel(l.c4, 8.0 / PI) < 1e-15);
        assert!(rel(l.c4, 2.5464790894703255) < 1e-14);
        // 2/(eπ) · 4^(−1/2)
        assert!(rel(l.c5, 1.0 / (E * PI)) < 1e-15);
        assert!(rel(l.c5, 0.11709966304863834) < 1e-14);
        // 1/(2π) · e^(−8)
        assert!(rel(l.c3, (-8f64).exp() / (2.0 * PI)) < 1e-14);
        // (2/π) · (4√2)^(−1/2) · e^(−5)
        assert!(rel(l.c6, 0.001803516910833822) < 1e-13);
    }

    #[test]
    fn c3_small_box_limit() {
        let p = ProblemParams::new(1, 1e-9, 1.0, 1.0).unwrap();
        assert!(rel(c3(&p), 2.0 / PI) < 1e-12);
    }

    #[test]
    fn theorem_constants_reference_values() {
        let t = compute_theorem_constants(&reference());
        assert_eq!(t.a5, 1.0);
        assert!(rel(t.a3, (-2f64).exp()) < 1e-15);
        assert!(rel(t.a4, (-10f64).exp()) < 1e-14);
        assert!(rel(t.a4, 4.5399929762484854e-5) < 1e-14);
        // ½ · π⁻¹ · 2⁻⁴ · e⁻¹⁶
        assert!(rel(t.a1, (-16f64).exp() / (32.0 * PI)) < 1e-14);
        assert!(rel(t.a1, 1.1194080830175115e-9) < 1e-13);
        // 512 · (π/2) · e¹⁰
        assert!(rel(t.a2, 256.0 * PI * 10f64.exp()) < 1e-13);
    }

    #[test]
    fn a5_clamps_at_one() {
        for c1 in [1.0, 1.5, 7.0] {
            let p = ProblemParams::new(2, 1.0, c1, 8.0).unwrap();
            assert_eq!(compute_theorem_constants(&p).a5, 1.0);
        }
    }

    #[test]
    fn relation_report_reference() {
        let r = cross_check_relations(&reference());
        assert!((r.lower.ratio - 1.0).abs() < 1e-12);
        assert!(rel(r.upper.derived, 200419346.57059965) < 1e-12);
        assert!(r.upper.ratio > 1.0);
        assert!(r.ordered);
        assert_eq!(r, cross_check_relations(&reference()));
        let k = ConstantSet::compute(&reference());
        assert_eq!(k.upper(), k.alt_a2);
        assert_eq!(k.c3_lower(), k.c3);
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(ProblemParams::new(0, 1.0, 1.0, 1.0).is_err());
        assert!(ProblemParams::new(1, 0.0, 1.0, 1.0).is_err());
        assert!(ProblemParams::new(1, 1.0, 0.0, 1.0).is_err());
        assert!(ProblemParams::new(1, 1.0, 2.0, 1.0).is_err());
    }

    fn params() -> impl Strategy<Value = ProblemParams> {
        // M / c1 ≤ 3 keeps exp(−4dM²/c1²) above underflow
        (1usize..=4, 0.02f64..3.0, 0.05f64..3.0, 1.0f64..4.0).prop_map(|(d, ratio, c1, stretch)| {
            ProblemParams::new(d, ratio * c1, c1, c1 * stretch).unwrap()
        })
    }

    proptest! {
        #[test]
        fn every_constant_positive(p in params()) {
            prop_assert!(ConstantSet::compute(&p).all_positive_finite());
        }

        #[test]
        fn lower_constant_relation_is_exact(p in params()) {
            let k = ConstantSet::compute(&p);
            prop_assert!(rel(k.alt_a1, k.a1) < 1e-9);
        }

        #[test]
        fn monotone_in_box_radius(p in params(), dm in 0.01f64..0.5) {
            let q = ProblemParams { m: p.m + dm, ..p };
            let (a, b) = (ConstantSet::compute(&p), ConstantSet::compute(&q));
            prop_assert!(b.c3 < a.c3);
            prop_assert!(b.c3_half_power < a.c3_half_power);
            prop_assert!(b.c6 < a.c6);
            prop_assert!(b.a1 < a.a1);
            prop_assert!(b.a4 < a.a4);
            prop_assert!(b.alt_a1 < a.alt_a1);
            // upper constants grow with M
            prop_assert!(b.a2 >= a.a2);
            prop_assert!(b.alt_a2 >= a.alt_a2);
            prop_assert_eq!((b.c4, b.c5, b.a3, b.a5), (a.c4, a.c5, a.a3, a.a5));
        }

        #[test]
        fn continuous_in_radii(p in params()) {
            let h = 1e-7;
            let q = ProblemParams { c1: p.c1 * (1.0 - h), c2: p.c2 * (1.0 + h), ..p };
            let (a, b) = (ConstantSet::compute(&p).all(), ConstantSet::compute(&q).all());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(rel(*y, *x) < 1e-4, "{} vs {}", x, y);
            }
        }
    }
}
