//! Two-parameter time, d-dimensional space, and discretized compact sets.
//!
//! Both time and space carry the sup norm `|x| = max_i |x_i|`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A point of the quarter plane `[0, ∞)²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct TimePoint {
    pub s1: f64,
    pub s2: f64,
}

impl TimePoint {
    pub fn new(s1: f64, s2: f64) -> Result<Self> {
        if !(s1.is_finite() && s2.is_finite() && s1 >= 0.0 && s2 >= 0.0) {
            return Err(Error::InvalidTimePoint(s1, s2));
        }
        Ok(Self { s1, s2 })
    }

    pub fn sup_norm(&self) -> f64 {
        self.s1.max(self.s2)
    }

    pub fn sup_dist(&self, other: &TimePoint) -> f64 {
        (self.s1 - other.s1).abs().max((self.s2 - other.s2).abs())
    }

    /// `self ≻₍₁₎ other`: coordinatewise dominance.
    pub fn dominates_ord1(&self, other: &TimePoint) -> bool {
        self.s1 >= other.s1 && self.s2 >= other.s2
    }

    /// `self ≻₍₂₎ other`: ahead in the first coordinate, behind in the second.
    pub fn dominates_ord2(&self, other: &TimePoint) -> bool {
        self.s1 >= other.s1 && self.s2 <= other.s2
    }

    fn total_cmp(&self, other: &TimePoint) -> Ordering {
        self.s1
            .total_cmp(&other.s1)
            .then(self.s2.total_cmp(&other.s2))
    }
}

impl TryFrom<[f64; 2]> for TimePoint {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        TimePoint::new(v[0], v[1])
    }
}

impl From<TimePoint> for [f64; 2] {
    fn from(p: TimePoint) -> Self {
        [p.s1, p.s2]
    }
}

/// A point of `ℝ^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpacePoint {
    coords: Vec<f64>,
}

impl SpacePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("space point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("space point coordinates must be finite"));
        }
        Ok(Self { coords })
    }

    pub fn origin(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn sup_norm(&self) -> f64 {
        self.coords.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    /// Sup distance to a raw coordinate slice of the same length.
    pub fn sup_dist_to(&self, other: &[f64]) -> f64 {
        debug_assert_eq!(self.coords.len(), other.len());
        self.coords
            .iter()
            .zip(other)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl TryFrom<Vec<f64>> for SpacePoint {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        SpacePoint::new(v)
    }
}

impl From<SpacePoint> for Vec<f64> {
    fn from(p: SpacePoint) -> Self {
        p.coords
    }
}

pub fn sup_norm_time(p: &TimePoint) -> f64 {
    p.sup_norm()
}

pub fn sup_dist_time(p: &TimePoint, q: &TimePoint) -> f64 {
    p.sup_dist(q)
}

/// Which of the two partial orders relate a pair `(p, q)`, in each direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OrderFlags {
    pub p_ord1_q: bool,
    pub p_ord2_q: bool,
    pub q_ord1_p: bool,
    pub q_ord2_p: bool,
}

impl OrderFlags {
    pub fn any(&self) -> bool {
        self.p_ord1_q || self.p_ord2_q || self.q_ord1_p || self.q_ord2_p
    }
}

pub fn partial_order(p: &TimePoint, q: &TimePoint) -> OrderFlags {
    OrderFlags {
        p_ord1_q: p.dominates_ord1(q),
        p_ord2_q: p.dominates_ord2(q),
        q_ord1_p: q.dominates_ord1(p),
        q_ord2_p: q.dominates_ord2(p),
    }
}

/// A finite discretization of a compact set `E ⊂ [0, ∞)²`.
///
/// Each atom stands for one cell of a partition of `E`; `cell_weights` holds
/// the Lebesgue mass of that cell and `mesh_gauge` the largest cell
/// sup-diameter. `c1` and `c2` are the smallest and largest sup norms over
/// the atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeshDoc", into = "MeshDoc")]
pub struct CompactMesh {
    atoms: Vec<TimePoint>,
    cell_weights: Vec<f64>,
    mesh_gauge: f64,
    c1: f64,
    c2: f64,
}

impl CompactMesh {
    /// Validates and assembles a mesh from explicit atoms.
    pub fn from_atoms(
        atoms: Vec<TimePoint>,
        cell_weights: Vec<f64>,
        mesh_gauge: f64,
    ) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("mesh needs at least one atom"));
        }
        if cell_weights.len() != atoms.len() {
            return Err(Error::DimensionMismatch {
                expected: atoms.len(),
                got: cell_weights.len(),
            });
        }
        if cell_weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("cell weights must be positive and finite"));
        }
        if !(mesh_gauge.is_finite() && mesh_gauge > 0.0) {
            return Err(invalid("mesh gauge must be positive and finite"));
        }
        for p in &atoms {
            TimePoint::new(p.s1, p.s2)?;
        }
        let mut sorted = atoms.clone();
        sorted.sort_by(TimePoint::total_cmp);
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid(format!(
                "duplicate atom ({}, {})",
                w[0].s1, w[0].s2
            )));
        }
        let (c1, c2) = radii(&atoms);
        Ok(Self {
            atoms,
            cell_weights,
            mesh_gauge,
            c1,
            c2,
        })
    }

    pub fn atoms(&self) -> &[TimePoint] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn cell_weights(&self) -> &[f64] {
        &self.cell_weights
    }

    pub fn mesh_gauge(&self) -> f64 {
        self.mesh_gauge
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// Cell weights normalized to a probability vector.
    pub fn reference_weights(&self) -> Vec<f64> {
        let total: f64 = self.cell_weights.iter().sum();
        self.cell_weights.iter().map(|w| w / total).collect()
    }
}

fn radii(atoms: &[TimePoint]) -> (f64, f64) {
    atoms.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), p| {
        let n = p.sup_norm();
        (lo.min(n), hi.max(n))
    })
}

/// On-disk form of a [`CompactMesh`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshDoc {
    pub atoms: Vec<[f64; 2]>,
    pub cell_weights: Vec<f64>,
    pub mesh_gauge: f64,
    #[serde(default)]
    pub c1: Option<f64>,
    #[serde(default)]
    pub c2: Option<f64>,
}

impl TryFrom<MeshDoc> for CompactMesh {
    type Error = Error;

    fn try_from(doc: MeshDoc) -> Result<Self> {
        let atoms = doc
            .atoms
            .iter()
            .map(|a| TimePoint::try_from(*a))
            .collect::<Result<Vec<_>>>()?;
        let mesh = CompactMesh::from_atoms(atoms, doc.cell_weights, doc.mesh_gauge)?;
        for (name, given, actual) in [("c1", doc.c1, mesh.c1), ("c2", doc.c2, mesh.c2)] {
            if let Some(g) = given {
                if (g - actual).abs() > 1e-9 * actual.max(1.0) {
                    return Err(invalid(format!(
                        "{name} = {g} does not match the atoms (expected {actual})"
                    )));
                }
            }
        }
        Ok(mesh)
    }
}

impl From<CompactMesh> for MeshDoc {
    fn from(m: CompactMesh) -> Self {
        MeshDoc {
            atoms: m.atoms.iter().map(|&p| p.into()).collect(),
            cell_weights: m.cell_weights,
            mesh_gauge: m.mesh_gauge,
            c1: Some(m.c1),
            c2: Some(m.c2),
        }
    }
}

/// Cell-centre discretization of the rectangle `[t_lo, t_hi]` on an
/// `n1 × n2` grid. Atoms are listed with the first coordinate varying
/// slowest.
pub fn build_rect_mesh(
    t_lo: TimePoint,
    t_hi: TimePoint,
    n1: usize,
    n2: usize,
) -> Result<CompactMesh> {
    if !(t_hi.s1 > t_lo.s1 && t_hi.s2 > t_lo.s2) {
        return Err(Error::Degenerate(format!(
            "rectangle [{:?}, {:?}] has a zero or negative side",
            t_lo, t_hi
        )));
    }
    if n1 == 0 || n2 == 0 {
        return Err(invalid("grid counts must be at least 1"));
    }
    let h1 = (t_hi.s1 - t_lo.s1) / n1 as f64;
    let h2 = (t_hi.s2 - t_lo.s2) / n2 as f64;
    let mut atoms = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        let s1 = t_lo.s1 + (i as f64 + 0.5) * h1;
        for j in 0..n2 {
            let s2 = t_lo.s2 + (j as f64 + 0.5) * h2;
            atoms.push(TimePoint::new(s1, s2)?);
        }
    }
    let n = atoms.len();
    CompactMesh::from_atoms(atoms, vec![h1 * h2; n], h1.max(h2))
}

/// `n` atoms at the midpoints of `n` equal sub-segments of `[a, b]`.
pub fn build_segment_mesh(a: TimePoint, b: TimePoint, n: usize) -> Result<CompactMesh> {
    if a == b {
        return Err(Error::Degenerate("segment endpoints coincide".into()));
    }
    if n == 0 {
        return Err(invalid("segment needs at least one atom"));
    }
    let (d1, d2) = (b.s1 - a.s1, b.s2 - a.s2);
    let length = d1.hypot(d2);
    let atoms = (0..n)
        .map(|k| {
            let f = (k as f64 + 0.5) / n as f64;
            TimePoint::new(a.s1 + f * d1, a.s2 + f * d2)
        })
        .collect::<Result<Vec<_>>>()?;
    CompactMesh::from_atoms(atoms, vec![length / n as f64; n], a.sup_dist(&b) / n as f64)
}

/// Keeps atoms with `|t| >= min_norm`, i.e. the mesh of `{t ∈ E : |t| ≥ min_norm}`.
pub fn restrict_mesh(m: &CompactMesh, min_norm: f64) -> Result<CompactMesh> {
    let (atoms, weights): (Vec<_>, Vec<_>) = m
        .atoms
        .iter()
        .zip(&m.cell_weights)
        .filter(|(p, _)| p.sup_norm() >= min_norm)
        .map(|(p, w)| (*p, *w))
        .unzip();
    if atoms.is_empty() {
        return Err(Error::EmptyMesh(min_norm));
    }
    let (c1, c2) = radii(&atoms);
    Ok(CompactMesh {
        atoms,
        cell_weights: weights,
        mesh_gauge: m.mesh_gauge,
        c1,
        c2,
    })
}
