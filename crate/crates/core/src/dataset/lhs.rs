use rand::seq::SliceRandom;
use rand::{Rng, RngExt};

use super::ParameterRanges;
use crate::rng::{seeded, stream};

/// Latin hypercube on the box `[lo, hi]`: in every dimension each of the
/// `n` equal-width strata receives exactly one point, jittered uniformly
/// inside its stratum, with strata assigned to rows by an independent
/// permutation per dimension.
pub fn latin_hypercube<R: Rng>(n: usize, lo: &[f64], hi: &[f64], rng: &mut R) -> Vec<Vec<f64>> {
    assert_eq!(lo.len(), hi.len());
    let mut rows = vec![vec![0.0; lo.len()]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for (j, (&a, &b)) in lo.iter().zip(hi).enumerate() {
        strata.shuffle(rng);
        for (row, &k) in rows.iter_mut().zip(&strata) {
            let u: f64 = rng.random();
            // the stratum edge is kept exact even when rounding would push
            // the point into the next stratum
            let x = a + (b - a) * (k as f64 + u) / n as f64;
            let upper = a + (b - a) * (k + 1) as f64 / n as f64;
            row[j] = if x >= upper && k + 1 < n { upper.next_down() } else { x.min(b) };
        }
    }
    rows
}

/// `n` rows over the nine sampled inputs, deterministic in `seed`.
pub fn lhs_sample(n: usize, ranges: &ParameterRanges, seed: u64) -> Vec<[f64; 9]> {
    let mut rng = seeded(seed, stream::LHS);
    latin_hypercube(n, &ranges.lo, &ranges.hi, &mut rng)
        .into_iter()
        .map(|r| r.try_into().expect("nine columns"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stratum(x: f64, lo: f64, hi: f64, n: usize) -> usize {
        (((x - lo) / (hi - lo) * n as f64).floor() as usize).min(n - 1)
    }

    fn assert_stratified(rows: &[[f64; 9]], ranges: &ParameterRanges) {
        let n = rows.len();
        for j in 0..9 {
            let mut seen = vec![false; n];
            for r in rows {
                assert!(r[j] >= ranges.lo[j] && r[j] <= ranges.hi[j]);
                let k = stratum(r[j], ranges.lo[j], ranges.hi[j], n);
                assert!(!seen[k], "stratum {k} of dim {j} hit twice");
                seen[k] = true;
            }
        }
    }

    #[test]
    fn single_row_inside_box() {
        let ranges = ParameterRanges::default();
        let rows = lhs_sample(1, &ranges, 0);
        assert_eq!(rows.len(), 1);
        assert_stratified(&rows, &ranges);
    }

    #[test]
    fn deciles_are_each_hit_once() {
        let ranges = ParameterRanges::default();
        assert_stratified(&lhs_sample(10, &ranges, 123), &ranges);
    }

    #[test]
    fn deterministic_in_seed() {
        let ranges = ParameterRanges::default();
        let a = lhs_sample(64, &ranges, 5);
        let b = lhs_sample(64, &ranges, 5);
        assert!(a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, lhs_sample(64, &ranges, 6));
    }

    proptest! {
        #[test]
        fn stratification_holds(seed in any::<u64>(), n in prop::sample::select(vec![1usize, 7, 100])) {
            let ranges = ParameterRanges::default();
            assert_stratified(&lhs_sample(n, &ranges, seed), &ranges);
        }
    }
}
