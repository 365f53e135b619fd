//! Simple random sampling without replacement (SRSWOR).
//!
//! Every random draw in the crate goes through [`rng_for`], which seeds a
//! ChaCha8 stream cipher generator from a 64-bit seed mixed with a list of
//! tags (replication index, segment index, ...). ChaCha8 output is fixed by
//! its specification, so draws are reproducible across platforms, and
//! tagged sub-streams let parallel and serial runs agree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::popdata::Population;

/// Largest number of subsets [`enumerate_samples`] will walk.
pub const ENUMERATION_CAP: u128 = 1_000_000;

/// A without-replacement sample with Horvitz-Thompson weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDraw {
    /// Population indices (into the sorted population), ascending.
    pub unit_ids: Vec<usize>,
    /// Incomes of the selected units, ascending.
    pub y: Vec<f64>,
    /// `w_i = 1 / pi_i`.
    pub weights: Vec<f64>,
    pub population_size: usize,
}

impl SampleDraw {
    /// Builds the SRSWOR sample made of `unit_ids` (any order, distinct).
    pub fn from_units(pop: &Population, mut unit_ids: Vec<usize>) -> Result<Self> {
        let big_n = pop.size();
        let n = unit_ids.len();
        if n < 2 || n > big_n {
            return Err(Error::invalid(format!(
                "sample size {n} outside [2, {big_n}]"
            )));
        }
        unit_ids.sort_unstable();
        if unit_ids.windows(2).any(|w| w[0] == w[1]) || unit_ids[n - 1] >= big_n {
            return Err(Error::invalid(
                "unit ids must be distinct population indices",
            ));
        }
        // the population is sorted, so ascending ids give ascending incomes
        let y = unit_ids.iter().map(|&i| pop.incomes()[i]).collect();
        Ok(SampleDraw {
            unit_ids,
            y,
            weights: vec![big_n as f64 / n as f64; n],
            population_size: big_n,
        })
    }

    pub fn size(&self) -> usize {
        self.y.len()
    }
}

/// Seeded generator for the sub-stream identified by `tags`.
pub fn rng_for(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}

/// SplitMix64 chain over the seed and tags.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    tags.iter().fold(mix(seed), |acc, &t| mix(acc ^ mix(t)))
}

/// Draws `n` of the `N` units, every size-`n` subset equally likely
/// (partial Fisher-Yates shuffle).
pub fn draw_srswor(pop: &Population, n: usize, seed: u64) -> Result<SampleDraw> {
    draw_srswor_with(pop, n, &mut rng_for(seed, &[]))
}

pub fn draw_srswor_with<R: Rng + ?Sized>(
    pop: &Population,
    n: usize,
    rng: &mut R,
) -> Result<SampleDraw> {
    let big_n = pop.size();
    if n < 2 || n > big_n {
        return Err(Error::invalid(format!(
            "sample size {n} outside [2, {big_n}]"
        )));
    }
    let mut ids: Vec<usize> = (0..big_n).collect();
    for i in 0..n {
        let j = rng.random_range(i..big_n);
        ids.swap(i, j);
    }
    ids.truncate(n);
    SampleDraw::from_units(pop, ids)
}

/// First- and second-order SRSWOR inclusion probabilities
/// `(n/N, n(n-1)/(N(N-1)))`.
pub fn inclusion_probs(big_n: usize, n: usize) -> Result<(f64, f64)> {
    if n < 2 || n > big_n {
        return Err(Error::invalid(format!(
            "sample size {n} outside [2, {big_n}]"
        )));
    }
    let (nf, bf) = (n as f64, big_n as f64);
    Ok((nf / bf, nf * (nf - 1.0) / (bf * (bf - 1.0))))
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Iterates every size-`n` subset of `0..N` in lexicographic order.
pub fn enumerate_samples(big_n: usize, n: usize) -> Result<Subsets> {
    if n > big_n {
        return Err(Error::invalid(format!("subset size {n} exceeds {big_n}")));
    }
    let count = binomial(big_n, n);
    if count > ENUMERATION_CAP {
        return Err(Error::TooManySubsets {
            count,
            cap: ENUMERATION_CAP,
        });
    }
    Ok(Subsets {
        big_n,
        current: Some((0..n).collect()),
    })
}

#[derive(Debug, Clone)]
pub struct Subsets {
    big_n: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let n = out.len();
        let mut next = out.clone();
        // rightmost position that can still be advanced
        if let Some(i) = (0..n).rev().find(|&i| next[i] < self.big_n - n + i) {
            next[i] += 1;
            for j in i + 1..n {
                next[j] = next[j - 1] + 1;
            }
            self.current = Some(next);
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn pop(n: usize) -> Population {
        Population::new((1..=n).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn census_draw() {
        let p = pop(4);
        for seed in 0..5 {
            let s = draw_srswor(&p, 4, seed).unwrap();
            assert_eq!(s.unit_ids, vec![0, 1, 2, 3]);
            assert_eq!(s.weights, vec![1.0; 4]);
        }
    }

    #[test]
    fn draws_are_deterministic() {
        let p = pop(50);
        assert_eq!(
            draw_srswor(&p, 10, 3).unwrap(),
            draw_srswor(&p, 10, 3).unwrap()
        );
    }

    #[test]
    fn empirical_inclusion_probability() {
        let p = pop(10);
        let mut rng = rng_for(99, &[]);
        let mut hits = [0usize; 10];
        let reps = 100_000;
        for _ in 0..reps {
            for id in draw_srswor_with(&p, 4, &mut rng).unwrap().unit_ids {
                hits[id] += 1;
            }
        }
        for h in hits {
            assert!((h as f64 / reps as f64 - 0.4).abs() < 0.01);
        }
    }

    #[test]
    fn sample_invariants() {
        let p = pop(30);
        let s = draw_srswor(&p, 12, 5).unwrap();
        assert_eq!(s.size(), 12);
        assert_eq!(s.unit_ids.iter().collect::<HashSet<_>>().len(), 12);
        assert!(s.y.windows(2).all(|w| w[0] <= w[1]));
        assert!(s.weights.iter().all(|&w| w == 2.5));
        assert!(draw_srswor(&p, 1, 0).is_err());
        assert!(draw_srswor(&p, 31, 0).is_err());
    }

    #[test]
    fn inclusion_formulas() {
        let (a, b) = inclusion_probs(10, 4).unwrap();
        assert!((a - 0.4).abs() < 1e-15 && (b - 2.0 / 15.0).abs() < 1e-15);
        assert_eq!(inclusion_probs(7, 7).unwrap(), (1.0, 1.0));
        let (a, b) = inclusion_probs(4, 2).unwrap();
        assert!((a - 0.5).abs() < 1e-15 && (b - 1.0 / 6.0).abs() < 1e-15);
        assert!(inclusion_probs(4, 1).is_err());
    }

    #[test]
    fn subset_counts() {
        assert_eq!(enumerate_samples(4, 2).unwrap().count(), 6);
        assert_eq!(enumerate_samples(5, 2).unwrap().count(), 10);
        let all: HashSet<_> = enumerate_samples(6, 3).unwrap().collect();
        assert_eq!(all.len(), 20);
        assert!(matches!(
            enumerate_samples(30, 15),
            Err(Error::TooManySubsets { .. })
        ));
        assert_eq!(binomial(30, 15), 155_117_520);
    }

    #[test]
    fn enumerated_inclusion_frequencies_are_exact() {
        let (big_n, n) = (7, 3);
        let subsets: Vec<_> = enumerate_samples(big_n, n).unwrap().collect();
        let total = subsets.len();
        let mut first = vec![0usize; big_n];
        let mut second = vec![vec![0usize; big_n]; big_n];
        for s in &subsets {
            for &i in s {
                first[i] += 1;
                for &j in s {
                    second[i][j] += 1;
                }
            }
        }
        let (pi1, pi2) = inclusion_probs(big_n, n).unwrap();
        for (i, row) in second.iter().enumerate() {
            assert!((first[i] as f64 / total as f64 - pi1).abs() < 1e-12);
            for (j, &c) in row.iter().enumerate() {
                if i != j {
                    assert!((c as f64 / total as f64 - pi2).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn horvitz_thompson_total_is_unbiased() {
        let p = Population::new(vec![0.5, 1.0, 4.0, 7.5, 9.0, 12.0]).unwrap();
        let mut acc = 0.0;
        let mut count = 0;
        for ids in enumerate_samples(6, 3).unwrap() {
            let s = SampleDraw::from_units(&p, ids).unwrap();
            acc += s.y.iter().zip(&s.weights).map(|(y, w)| y * w).sum::<f64>();
            count += 1;
        }
        assert!((acc / count as f64 - p.total()).abs() < 1e-12);
    }
}
