use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const JITTER_START: f64 = 1e-12;
const JITTER_MAX: f64 = 1e-6;

/// Lower Cholesky factor of a covariance matrix, packed by rows.
///
/// Indices with zero variance are left out of the factorization and always
/// draw exactly zero; under the sheet covariance such an index has zero
/// covariance with every other one.
#[derive(Clone, Debug)]
pub struct GaussianFactor {
    n: usize,
    active: Vec<usize>,
    lower: Vec<f64>,
    jitter: f64,
}

impl GaussianFactor {
    pub fn new(n: usize, cov: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let active: Vec<usize> = (0..n).filter(|&i| cov(i, i) > 0.0).collect();
        let m = active.len();
        if m == 0 {
            return Ok(Self {
                n,
                active,
                lower: Vec::new(),
                jitter: 0.0,
            });
        }
        let base = DMatrix::from_fn(m, m, |i, j| cov(active[i], active[j]));
        let max_diag = (0..m).map(|i| base[(i, i)]).fold(0.0_f64, f64::max);

        let mut rel = JITTER_START;
        loop {
            let mut a = base.clone();
            for i in 0..m {
                a[(i, i)] += rel * max_diag;
            }
            if let Some(chol) = Cholesky::new(a) {
                let l = chol.l();
                let mut lower = Vec::with_capacity(m * (m + 1) / 2);
                for i in 0..m {
                    for j in 0..=i {
                        lower.push(l[(i, j)]);
                    }
                }
                return Ok(Self {
                    n,
                    active,
                    lower,
                    jitter: rel * max_diag,
                });
            }
            if rel >= JITTER_MAX {
                return Err(Error::NotPositiveDefinite {
                    jitter: rel * max_diag,
                });
            }
            rel *= 10.0;
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Diagonal jitter that was added before the factorization succeeded.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Writes one centred draw into `out[i * stride]`, `i < n`.
    pub fn draw_strided<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        z: &mut Vec<f64>,
        out: &mut [f64],
        stride: usize,
    ) {
        let m = self.active.len();
        z.clear();
        z.extend((0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
        for i in 0..self.n {
            out[i * stride] = 0.0;
        }
        let mut row = 0;
        for (i, &idx) in self.active.iter().enumerate() {
            let l = &self.lower[row..row + i + 1];
            out[idx * stride] = l.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
            row += i + 1;
        }
    }
}

/// Brownian motion observed at a set of times.
///
/// `order` visits the distinct times in increasing order; `slot[k]` maps the
/// k-th query to its distinct time.
#[derive(Clone, Debug)]
pub struct BrownianTimes {
    times: Vec<f64>,
    slot: Vec<usize>,
}

impl BrownianTimes {
    pub fn new(queries: impl IntoIterator<Item = f64>) -> Self {
        let queries: Vec<f64> = queries.into_iter().collect();
        let mut times = queries.clone();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let slot = queries
            .iter()
            .map(|q| times.binary_search_by(|t| t.total_cmp(q)).unwrap())
            .collect();
        Self { times, slot }
    }

    pub fn distinct(&self) -> usize {
        self.times.len()
    }

    /// Samples the path at the distinct times into `path` (cumulative sums
    /// of independent increments; a time of zero yields exactly zero).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, path: &mut Vec<f64>) {
        path.clear();
        let (mut prev, mut acc) = (0.0, 0.0);
        for &t in &self.times {
            let z: f64 = rng.sample(StandardNormal);
            let dt = t - prev;
            if dt > 0.0 {
                acc += dt.sqrt() * z;
            }
            path.push(acc);
            prev = t;
        }
    }

    pub fn at(&self, path: &[f64], query: usize) -> f64 {
        path[self.slot[query]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SeedSpec;

    #[test]
    fn factor_reproduces_small_covariance() {
        let cov = [[4.0, 2.0], [2.0, 3.0]];
        let f = GaussianFactor::new(2, |i, j| cov[i][j]).unwrap();
        // L = [[2,0],[1,√2]] up to jitter
        assert!((f.lower[0] - 2.0).abs() < 1e-9);
        assert!((f.lower[1] - 1.0).abs() < 1e-9);
        assert!((f.lower[2] - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_indices_are_exact_zero() {
        let f = GaussianFactor::new(3, |i, j| if i == 1 || j == 1 { 0.0 } else { 1.0 + (i == j) as u8 as f64 })
            .unwrap();
        let mut rng = SeedSpec::new(1, 0).rng();
        let mut out = vec![9.0; 3];
        f.draw_strided(&mut rng, &mut Vec::new(), &mut out, 1);
        assert_eq!(out[1], 0.0);
        assert_ne!(out[0], 0.0);
    }

    #[test]
    fn duplicate_rows_need_jitter() {
        let f = GaussianFactor::new(2, |_, _| 1.0).unwrap();
        assert!(f.jitter() > 0.0);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let cov = [[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(
            GaussianFactor::new(2, |i, j| cov[i][j]),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn brownian_times_dedup_and_zero() {
        let bt = BrownianTimes::new([1.0, 0.0, 1.0, 0.5]);
        assert_eq!(bt.distinct(), 3);
        let mut path = Vec::new();
        bt.draw(&mut SeedSpec::new(3, 0).rng(), &mut path);
        assert_eq!(bt.at(&path, 1), 0.0);
        assert_eq!(bt.at(&path, 0), bt.at(&path, 2));
    }
}
