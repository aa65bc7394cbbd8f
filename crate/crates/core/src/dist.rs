//! Finite categorical distributions with a sparse representation.
//!
//! A row is stored as a uniform `base` mass on every outcome plus sparse
//! `extra` mass on a few outcomes, so that `P(j) = base + extra(j)`. This
//! covers exact sparse rows (`base = 0`), the uniform fallback for
//! unobserved conditions (`base = 1/n`, no support) and additively smoothed
//! count rows without materializing dense vectors over huge outcome spaces.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Categorical {
    outcomes: usize,
    base: f64,
    /// Sorted by outcome, no duplicates.
    extra: Vec<(usize, f64)>,
}

impl Categorical {
    pub fn uniform(outcomes: usize) -> Self {
        assert!(outcomes > 0, "categorical over an empty outcome set");
        Categorical {
            outcomes,
            base: 1.0 / outcomes as f64,
            extra: Vec::new(),
        }
    }

    pub fn point(outcomes: usize, at: usize) -> Self {
        assert!(at < outcomes);
        Categorical {
            outcomes,
            base: 0.0,
            extra: alloc::vec![(at, 1.0)],
        }
    }

    /// Normalizes a dense weight vector. Zero entries are dropped from the
    /// support. Falls back to uniform when all weights are zero.
    pub fn from_dense(weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Self::uniform(weights.len());
        }
        let extra = weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(j, w)| (j, w / total))
            .collect();
        Categorical {
            outcomes: weights.len(),
            base: 0.0,
            extra,
        }
    }

    /// Normalizes sparse `(outcome, weight)` pairs; duplicates are summed.
    pub fn from_sparse(outcomes: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (j, w) in pairs {
            assert!(j < outcomes, "outcome {j} out of range {outcomes}");
            *acc.entry(j).or_insert(0.0) += w;
        }
        let total: f64 = acc.values().sum();
        if total <= 0.0 {
            return Self::uniform(outcomes);
        }
        Categorical {
            outcomes,
            base: 0.0,
            extra: acc
                .into_iter()
                .filter(|(_, w)| *w > 0.0)
                .map(|(j, w)| (j, w / total))
                .collect(),
        }
    }

    /// Maximum-likelihood estimate with additive smoothing `alpha`:
    /// `P(j) = (c_j + alpha) / (N + alpha * outcomes)`. A row with no counts
    /// and `alpha = 0` is uniform.
    pub fn from_counts(outcomes: usize, counts: &BTreeMap<usize, u64>, alpha: f64) -> Self {
        assert!(outcomes > 0);
        let n: u64 = counts.values().sum();
        let denom = n as f64 + alpha * outcomes as f64;
        if denom <= 0.0 {
            return Self::uniform(outcomes);
        }
        Categorical {
            outcomes,
            base: alpha / denom,
            extra: counts
                .iter()
                .filter(|(_, c)| **c > 0)
                .map(|(j, c)| (*j, *c as f64 / denom))
                .collect(),
        }
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn prob(&self, j: usize) -> f64 {
        let extra = match self.extra.binary_search_by_key(&j, |(k, _)| *k) {
            Ok(pos) => self.extra[pos].1,
            Err(_) => 0.0,
        };
        self.base + extra
    }

    /// `E[f(J)]`, where `sum_all` must equal `Σ_j f(j)` over every outcome.
    /// Pass anything when the row has no base mass.
    #[inline]
    pub fn expect(&self, sum_all: f64, f: impl Fn(usize) -> f64) -> f64 {
        let mut acc = if self.base > 0.0 { self.base * sum_all } else { 0.0 };
        for &(j, p) in &self.extra {
            acc += p * f(j);
        }
        acc
    }

    pub fn has_base(&self) -> bool {
        self.base > 0.0
    }

    pub fn total_mass(&self) -> f64 {
        self.base * self.outcomes as f64 + self.extra.iter().map(|(_, p)| p).sum::<f64>()
    }

    pub fn is_uniform(&self) -> bool {
        self.extra.is_empty() && self.base > 0.0
    }

    /// Dense probability vector. Only sensible for small outcome sets.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = alloc::vec![self.base; self.outcomes];
        for &(j, p) in &self.extra {
            v[j] += p;
        }
        v
    }

    /// Outcomes with explicit mass. Empty for a pure uniform row.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.extra.iter().map(move |&(j, p)| (j, p + self.base))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let base_total = self.base * self.outcomes as f64;
        if u < base_total {
            let j = (u / self.base) as usize;
            return j.min(self.outcomes - 1);
        }
        let mut acc = base_total;
        for &(j, p) in &self.extra {
            acc += p;
            if u < acc {
                return j;
            }
        }
        self.extra.last().map(|(j, _)| *j).unwrap_or(self.outcomes - 1)
    }

    /// Total variation distance `½ Σ_j |P(j) − Q(j)|`.
    pub fn total_variation(&self, other: &Categorical) -> f64 {
        assert_eq!(self.outcomes, other.outcomes);
        let mut sum = 0.0;
        let (mut i, mut k) = (0, 0);
        let mut explicit = 0usize;
        while i < self.extra.len() || k < other.extra.len() {
            let a = self.extra.get(i).copied();
            let b = other.extra.get(k).copied();
            let (p, q) = match (a, b) {
                (Some((ja, pa)), Some((jb, pb))) if ja == jb => {
                    i += 1;
                    k += 1;
                    (pa, pb)
                }
                (Some((ja, pa)), Some((jb, _))) if ja < jb => {
                    i += 1;
                    (pa, 0.0)
                }
                (Some(_), Some((_, pb))) => {
                    k += 1;
                    (0.0, pb)
                }
                (Some((_, pa)), None) => {
                    i += 1;
                    (pa, 0.0)
                }
                (None, Some((_, pb))) => {
                    k += 1;
                    (0.0, pb)
                }
                (None, None) => unreachable!(),
            };
            explicit += 1;
            sum += (self.base + p - other.base - q).abs();
        }
        sum += (self.outcomes - explicit) as f64 * (self.base - other.base).abs();
        0.5 * sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;

    #[test]
    fn smoothed_counts_normalize() {
        let mut c = BTreeMap::new();
        c.insert(1, 3);
        c.insert(4, 1);
        for alpha in [0.0, 0.5, 2.0] {
            let row = Categorical::from_counts(6, &c, alpha);
            assert!((row.total_mass() - 1.0).abs() < 1e-12);
            assert!((row.to_dense().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let row = Categorical::from_counts(6, &c, 1.0);
        assert!((row.prob(1) - 4.0 / 10.0).abs() < 1e-12);
        assert!((row.prob(0) - 1.0 / 10.0).abs() < 1e-12);
    }

    #[test]
    fn empty_counts_fall_back_to_uniform() {
        let row = Categorical::from_counts(4, &BTreeMap::new(), 0.0);
        assert!(row.is_uniform());
        assert_eq!(row.to_dense(), alloc::vec![0.25; 4]);
    }

    #[test]
    fn expectation_matches_dense() {
        let mut c = BTreeMap::new();
        c.insert(0, 2);
        c.insert(2, 5);
        let row = Categorical::from_counts(3, &c, 0.3);
        let f = [1.0, -2.0, 7.5];
        let dense: f64 = row.to_dense().iter().zip(f).map(|(p, v)| p * v).sum();
        let sparse = row.expect(f.iter().sum(), |j| f[j]);
        assert!((dense - sparse).abs() < 1e-12);
    }

    #[test]
    fn total_variation_matches_dense() {
        let a = Categorical::from_dense(&[0.5, 0.5, 0.0, 0.0]);
        let b = Categorical::uniform(4);
        let mut c = BTreeMap::new();
        c.insert(3, 1);
        let s = Categorical::from_counts(4, &c, 1.0);
        for (x, y) in [(&a, &b), (&a, &s), (&b, &s), (&s, &s)] {
            let dense: f64 = x
                .to_dense()
                .iter()
                .zip(y.to_dense())
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>()
                * 0.5;
            assert!((x.total_variation(y) - dense).abs() < 1e-12);
        }
        assert!((a.total_variation(&b) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sampling_follows_probabilities() {
        let row = Categorical::from_dense(&[0.2, 0.0, 0.8]);
        let mut rng = seeding::rng(3);
        let n = 20_000;
        let hits = (0..n).filter(|_| row.sample(&mut rng) == 2).count();
        assert!((hits as f64 / n as f64 - 0.8).abs() < 0.02);
        let u = Categorical::uniform(5);
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[u.sample(&mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.2).abs() < 0.02);
        }
    }
}
