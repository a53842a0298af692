//! Multinomial bootstrap resampling as integer count vectors.
//!
//! A bootstrap dataset of size M over N observations is never materialized
//! as replicated rows. It is a count vector `K_{1:N} ~ Multinomial(M, 1/N)`,
//! and downstream code (conjugate updates, log-likelihoods) accepts the
//! counts as integer weights. This keeps resampling exact, cheap, and makes
//! M independent of N.

use rand::Rng;

use crate::core::rng::Stream;
use crate::error::{Error, Result};

/// Default cap on the number of enumerated bootstrap datasets N^M.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// A bootstrap resampling plan: dataset size M, replicate count B, and the
/// master seed that keys every replicate's stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapPlan {
    pub m: usize,
    pub b: usize,
    pub master_seed: u64,
}

impl BootstrapPlan {
    pub fn new(m: usize, b: usize, master_seed: u64) -> Result<Self> {
        if m == 0 || b == 0 {
            return Err(Error::InvalidArgument("bootstrap plan requires m >= 1 and b >= 1".into()));
        }
        Ok(BootstrapPlan { m, b, master_seed })
    }
}

/// A length-N vector of replication counts summing to M.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVector {
    counts: Vec<u64>,
}

impl CountVector {
    /// Wraps raw counts. The sum invariant is the caller's `m`.
    pub fn new(counts: Vec<u64>, m: u64) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total != m {
            return Err(Error::InvalidArgument(format!(
                "counts sum to {total}, expected {m}"
            )));
        }
        Ok(CountVector { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Total number of resampled observations M.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// The identity resample: every count 1 (M = N).
    pub fn identity(n: usize) -> Self {
        CountVector { counts: vec![1; n] }
    }
}

/// Draws `K_{1:n} ~ Multinomial(m, 1/n)` from the given stream.
///
/// Sampling is m independent uniform categorical draws, tallied. This is
/// the reference scheme; anything faster must reproduce its output stream
/// exactly or live behind a config flag.
pub fn sample_counts(n: usize, m: usize, stream: &mut Stream) -> CountVector {
    debug_assert!(n >= 1 && m >= 1);
    let mut counts = vec![0u64; n];
    for _ in 0..m {
        let idx = stream.random_range(0..n);
        counts[idx] += 1;
    }
    CountVector { counts }
}

/// Enumerates every composition of `m` into `n` nonnegative counts together
/// with its multinomial multiplicity `m! / prod_i counts[i]!`.
///
/// The multiplicities sum to exactly `n^m`, the number of ordered bootstrap
/// datasets. Compositions are emitted in lexicographically decreasing order
/// of the count vector. Fails if `n^m` exceeds `cap`.
pub fn enumerate_count_vectors(
    n: usize,
    m: usize,
    cap: Option<u128>,
) -> Result<Vec<(CountVector, u128)>> {
    let cap = cap.unwrap_or(DEFAULT_ENUMERATION_CAP);
    let terms = (n as u128)
        .checked_pow(m as u32)
        .ok_or(Error::EnumerationCapExceeded { terms: u128::MAX, cap })?;
    if terms > cap {
        return Err(Error::EnumerationCapExceeded { terms, cap });
    }

    let mut out = Vec::new();
    let mut counts = vec![0u64; n];
    compose(&mut counts, 0, m as u64, &mut out);
    Ok(out)
}

fn compose(counts: &mut Vec<u64>, pos: usize, remaining: u64, out: &mut Vec<(CountVector, u128)>) {
    if pos == counts.len() - 1 {
        counts[pos] = remaining;
        out.push((
            CountVector { counts: counts.clone() },
            multinomial_multiplicity(counts),
        ));
        return;
    }
    for k in (0..=remaining).rev() {
        counts[pos] = k;
        compose(counts, pos + 1, remaining - k, out);
    }
    counts[pos] = 0;
}

/// `m! / prod_i k_i!` computed as a product of binomial coefficients, which
/// keeps intermediates no larger than the result.
fn multinomial_multiplicity(counts: &[u64]) -> u128 {
    let mut remaining: u64 = counts.iter().sum();
    let mut mult: u128 = 1;
    for &k in counts {
        mult *= binomial(remaining, k);
        remaining -= k;
    }
    mult
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::rng::derive_stream;

    #[test]
    fn single_support_point_gets_all_mass() {
        let mut s = derive_stream(1, 0);
        let c = sample_counts(1, 5, &mut s);
        assert_eq!(c.counts(), &[5]);
    }

    #[test]
    fn counts_always_sum_to_m() {
        let mut s = derive_stream(9, 4);
        for m in [1usize, 2, 17, 100] {
            let c = sample_counts(7, m, &mut s);
            assert_eq!(c.total(), m as u64);
        }
    }

    #[test]
    fn sample_counts_is_order_independent_across_replicates() {
        // Replicate 7's counts depend only on its own stream, not on whether
        // other replicates were drawn first.
        let draw = |seed| {
            let mut s = derive_stream(seed, 7);
            sample_counts(5, 10, &mut s)
        };
        let direct = draw(42);
        for b in [0u64, 3, 12] {
            let mut other = derive_stream(42, b);
            let _ = sample_counts(5, 10, &mut other);
        }
        assert_eq!(direct, draw(42));
    }

    /// Empirical pmf check against the exact multinomial: n=3, m=2, so
    /// P(counts = [2,0,0]) = 1/9.
    #[test]
    fn empirical_pmf_three_cells() {
        let mut s = derive_stream(1234, 0);
        let trials = 200_000;
        let mut hits = 0u64;
        for _ in 0..trials {
            if sample_counts(3, 2, &mut s).counts() == [2, 0, 0] {
                hits += 1;
            }
        }
        let p = 1.0 / 9.0;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        let got = hits as f64 / trials as f64;
        assert!((got - p).abs() < 3.0 * se, "got {got}, want {p} +- {}", 3.0 * se);
    }

    /// n=2, m=2: exact pmf {1/4, 1/2, 1/4} over [2,0], [1,1], [0,2].
    #[test]
    fn empirical_pmf_two_cells() {
        let mut s = derive_stream(77, 0);
        let trials = 200_000;
        let mut tally = [0u64; 3];
        for _ in 0..trials {
            let c = sample_counts(2, 2, &mut s);
            match c.counts()[0] {
                2 => tally[0] += 1,
                1 => tally[1] += 1,
                0 => tally[2] += 1,
                _ => unreachable!(),
            }
        }
        for (hits, p) in tally.iter().zip([0.25, 0.5, 0.25]) {
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            let got = *hits as f64 / trials as f64;
            assert!((got - p).abs() < 3.0 * se, "got {got}, want {p}");
        }
    }

    /// Law of large numbers: each marginal mean tends to M/N.
    #[test]
    fn marginal_mean_matches_m_over_n() {
        let (n, m, reps) = (4usize, 12usize, 50_000usize);
        let mut s = derive_stream(5150, 0);
        let mut sums = vec![0u64; n];
        for _ in 0..reps {
            let c = sample_counts(n, m, &mut s);
            for (acc, k) in sums.iter_mut().zip(c.counts()) {
                *acc += k;
            }
        }
        // Marginal count is Binomial(m, 1/n): var = m (1/n)(1 - 1/n).
        let mean = m as f64 / n as f64;
        let se = (m as f64 * (1.0 / n as f64) * (1.0 - 1.0 / n as f64) / reps as f64).sqrt();
        for acc in sums {
            let got = acc as f64 / reps as f64;
            assert!((got - mean).abs() < 3.0 * se, "got {got}, want {mean}");
        }
    }

    #[test]
    fn enumerate_two_by_two() {
        let e = enumerate_count_vectors(2, 2, None).unwrap();
        let as_pairs: Vec<(Vec<u64>, u128)> =
            e.iter().map(|(c, w)| (c.counts().to_vec(), *w)).collect();
        assert_eq!(
            as_pairs,
            vec![(vec![2, 0], 1), (vec![1, 1], 2), (vec![0, 2], 1)]
        );
        assert_eq!(e.iter().map(|(_, w)| w).sum::<u128>(), 4);
    }

    #[test]
    fn enumerate_degenerate_n1() {
        let e = enumerate_count_vectors(1, 3, None).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].0.counts(), &[3]);
        assert_eq!(e[0].1, 1);
    }

    #[test]
    fn enumerate_three_by_two() {
        let e = enumerate_count_vectors(3, 2, None).unwrap();
        assert_eq!(e.len(), 6); // C(2+3-1, 3-1) = 6 compositions
        assert_eq!(e.iter().map(|(_, w)| w).sum::<u128>(), 9);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let err = enumerate_count_vectors(10, 7, Some(1_000_000)).unwrap_err();
        assert!(matches!(err, Error::EnumerationCapExceeded { terms: 10_000_000, .. }));
    }

    /// Multiplicities sum to n^m for every small (n, m).
    #[test]
    fn multiplicities_sum_to_n_pow_m() {
        for n in 1usize..=6 {
            for m in 1usize..=6 {
                let total = (n as u128).pow(m as u32);
                if total > 10_000 {
                    continue;
                }
                let e = enumerate_count_vectors(n, m, None).unwrap();
                assert_eq!(e.iter().map(|(_, w)| w).sum::<u128>(), total, "n={n} m={m}");
                for (c, _) in &e {
                    assert_eq!(c.total(), m as u64);
                }
            }
        }
    }
}
