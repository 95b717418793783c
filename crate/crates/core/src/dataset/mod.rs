//! Training data for the network: Latin-hypercube inputs over the parameter
//! box, labelled with Heston prices and sensitivities.

mod io;
mod lhs;
mod scaling;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::heston::{
    call_price, price_gradient, FiniteDiffConfig, HestonParams, PricingInput, QuadratureConfig,
};
use crate::rng::{seeded, stream};
use crate::{Error, Result};

pub use io::{export_csv, load_dataset, save_dataset, CSV_HEADER};
pub use lhs::{latin_hypercube, lhs_sample};
pub use scaling::{features, fit_scalers, normalize, NormalizedSample, Scalers, FEATURE_NAMES};

/// Bumped whenever labelling changes in a way that alters stored values.
pub const GENERATOR_VERSION: u32 = 1;

/// Largest tolerated share of samples that had to be redrawn.
pub const MAX_REPLACEMENT_RATE: f64 = 1e-3;

/// Column names of a sampled row, in order. The strike is sampled as the
/// log-moneyness `log(K / S0)`.
pub const LHS_COLUMNS: [&str; 9] = ["kappa", "lambda", "sigma", "rho", "v0", "r", "tau", "s0", "log_moneyness"];

/// Sampling box for the nine inputs, in [`LHS_COLUMNS`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterRanges {
    pub lo: [f64; 9],
    pub hi: [f64; 9],
}

impl Default for ParameterRanges {
    fn default() -> Self {
        Self {
            lo: [0.005, 0.0, 0.1, -0.95, 0.0, 0.0, 0.05, 10.0, -1.0],
            hi: [5.0, 1.0, 1.0, 0.0, 1.0, 0.10, 1.0, 6000.0, 1.0],
        }
    }
}

impl ParameterRanges {
    pub fn validate(&self) -> Result<()> {
        for (j, name) in LHS_COLUMNS.iter().enumerate() {
            if !(self.lo[j].is_finite() && self.hi[j].is_finite() && self.lo[j] < self.hi[j]) {
                return Err(Error::Config(format!(
                    "range for {name} must satisfy lo < hi, got [{}, {}]",
                    self.lo[j], self.hi[j]
                )));
            }
        }
        Ok(())
    }

    /// The five Heston coordinates of the box.
    pub fn heston_box(&self) -> ([f64; 5], [f64; 5]) {
        let mut lo = [0.0; 5];
        let mut hi = [0.0; 5];
        lo.copy_from_slice(&self.lo[..5]);
        hi.copy_from_slice(&self.hi[..5]);
        (lo, hi)
    }
}

/// Maps a sampled row to a pricing input, recovering `K = S0 exp(m)`.
pub fn to_pricing_input(row: &[f64; 9]) -> PricingInput {
    let heston = HestonParams::new(row[0], row[1], row[2], row[3], row[4]);
    let s0 = row[7];
    PricingInput::new(heston, s0, row[5], row[6], s0 * row[8].exp())
}

/// One input with its price and raw sensitivities to the Heston parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub theta: PricingInput,
    pub price: f64,
    pub grad: [f64; 5],
}

impl LabeledSample {
    /// The sample as the fifteen numbers of a CSV row.
    pub fn to_row(&self) -> [f64; 15] {
        let t = &self.theta;
        let h = &t.heston;
        let g = &self.grad;
        [
            h.kappa, h.lambda, h.sigma, h.rho, h.v0, t.r, t.tau, t.s0, t.k, self.price, g[0], g[1], g[2], g[3],
            g[4],
        ]
    }

    pub fn from_row(r: &[f64; 15]) -> Self {
        Self {
            theta: PricingInput::new(HestonParams::new(r[0], r[1], r[2], r[3], r[4]), r[7], r[5], r[6], r[8]),
            price: r[9],
            grad: [r[10], r[11], r[12], r[13], r[14]],
        }
    }
}

/// Prices one input and its sensitivities.
pub fn label(theta: &PricingInput, quad: &QuadratureConfig, fd: &FiniteDiffConfig) -> Result<LabeledSample> {
    let price = call_price(theta, quad)?;
    let grad = price_gradient(theta, quad, fd)?;
    Ok(LabeledSample {
        theta: *theta,
        price,
        grad,
    })
}

/// Train / validation / test index sets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random 70:15:15 partition of `0..n`.
pub fn split_dataset(n: usize, seed: u64) -> DatasetSplit {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed, stream::SPLIT));
    let n_train = (0.70 * n as f64).floor() as usize;
    let n_val = (0.15 * n as f64).floor() as usize;
    let test = idx.split_off(n_train + n_val);
    let validation = idx.split_off(n_train);
    DatasetSplit {
        train: idx,
        validation,
        test,
    }
}

/// Counts from a labelling run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelStats {
    pub requested: usize,
    pub replaced: usize,
    pub rounds: usize,
}

/// A labelled sample set with everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ranges: ParameterRanges,
    pub seed: u64,
    pub generator_version: u32,
    pub samples: Vec<LabeledSample>,
    pub split: DatasetSplit,
    pub scalers: Option<Scalers>,
}

impl Dataset {
    /// Generates, labels, splits and fits scalers in one go.
    pub fn generate(
        n: usize,
        ranges: &ParameterRanges,
        seed: u64,
        quad: &QuadratureConfig,
        fd: &FiniteDiffConfig,
    ) -> Result<(Self, LabelStats)> {
        let (samples, stats) = build_dataset(n, ranges, seed, quad, fd)?;
        let split = split_dataset(samples.len(), seed);
        let scalers = fit_scalers(&samples, &split)?;
        Ok((
            Self {
                ranges: *ranges,
                seed,
                generator_version: GENERATOR_VERSION,
                samples,
                split,
                scalers: Some(scalers),
            },
            stats,
        ))
    }

    pub fn scalers(&self) -> Result<&Scalers> {
        self.scalers
            .as_ref()
            .ok_or_else(|| Error::Format("dataset has no fitted scalers".into()))
    }

    pub fn subset(&self, idx: &[usize]) -> Vec<LabeledSample> {
        idx.iter().map(|&i| self.samples[i]).collect()
    }
}

/// Draws `n` Latin-hypercube inputs and labels each with the pricer.
///
/// Rows whose labelling fails are replaced by a fresh hypercube of the
/// same size as the number of failures, drawn from a stream that depends
/// only on the seed and the round. Labelling runs in parallel but results
/// are collected in row order, so the output does not depend on the
/// number of workers.
pub fn build_dataset(
    n: usize,
    ranges: &ParameterRanges,
    seed: u64,
    quad: &QuadratureConfig,
    fd: &FiniteDiffConfig,
) -> Result<(Vec<LabeledSample>, LabelStats)> {
    if n == 0 {
        return Err(Error::InvalidInput("dataset size must be positive".into()));
    }
    ranges.validate()?;
    quad.validate()?;

    let rows = lhs_sample(n, ranges, seed);
    let mut slots: Vec<Option<LabeledSample>> = label_rows(&rows, quad, fd);
    let mut stats = LabelStats {
        requested: n,
        ..Default::default()
    };

    loop {
        let missing: Vec<usize> = slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_none())
            .map(|(i, _)| i)
            .collect();
        if missing.is_empty() {
            break;
        }
        stats.replaced += missing.len();
        stats.rounds += 1;
        if stats.replaced as f64 > MAX_REPLACEMENT_RATE * n as f64 {
            return Err(Error::Numerical(format!(
                "{} of {n} samples failed to price after {} rounds (limit {:.1}%); first failing row index {}",
                stats.replaced,
                stats.rounds,
                100.0 * MAX_REPLACEMENT_RATE,
                missing[0]
            )));
        }
        warn!("replacing {} unpriceable samples (round {})", missing.len(), stats.rounds);
        let mut rng = seeded(seed, stream::REPLACEMENT + stats.rounds as u64);
        let fresh = latin_hypercube(missing.len(), &ranges.lo, &ranges.hi, &mut rng);
        let fresh: Vec<[f64; 9]> = fresh.into_iter().map(|r| r.try_into().expect("nine columns")).collect();
        let labelled = label_rows(&fresh, quad, fd);
        for (slot, value) in missing.into_iter().zip(labelled) {
            slots[slot] = value;
        }
    }

    info!("labelled {n} samples, {} replaced", stats.replaced);
    Ok((slots.into_iter().map(|s| s.expect("all slots filled")).collect(), stats))
}

fn label_rows(rows: &[[f64; 9]], quad: &QuadratureConfig, fd: &FiniteDiffConfig) -> Vec<Option<LabeledSample>> {
    rows.par_iter()
        .map(|row| {
            let theta = to_pricing_input(row);
            match label(&theta, quad, fd) {
                Ok(s) if s.grad.iter().all(|g| g.is_finite()) => Some(s),
                Ok(_) => None,
                Err(e) => {
                    log::debug!("labelling failed for {theta:?}: {e}");
                    None
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strike_from_moneyness() {
        let mut row = [2.0, 0.1, 0.3, -0.5, 0.1, 0.02, 0.5, 100.0, 0.0];
        assert_eq!(to_pricing_input(&row).k, 100.0);
        row[8] = 1.0;
        assert!((to_pricing_input(&row).k - 271.828_182_845_904_5).abs() < 1e-9);
        row[7] = 6000.0;
        row[8] = -1.0;
        assert!((to_pricing_input(&row).k - 2207.276_647_028_654).abs() < 1e-9);
    }

    #[test]
    fn default_ranges_match_sampling_table() {
        let r = ParameterRanges::default();
        assert!(r.validate().is_ok());
        assert_eq!(r.lo[0], 0.005);
        assert_eq!(r.hi[7], 6000.0);
        let mut bad = r;
        bad.lo[3] = 0.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn split_sizes_and_disjointness() {
        for n in [1, 10, 101, 1000] {
            let s = split_dataset(n, 3);
            assert_eq!(s.train.len(), (0.7 * n as f64) as usize);
            assert_eq!(s.validation.len(), (0.15 * n as f64) as usize);
            let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
        assert_eq!(split_dataset(50, 9), split_dataset(50, 9));
        assert_ne!(split_dataset(50, 9), split_dataset(50, 10));
    }

    #[test]
    fn small_dataset_is_labelled_and_reproducible() {
        let quad = QuadratureConfig::default();
        let fd = FiniteDiffConfig::default();
        let (a, stats) = build_dataset(10, &ParameterRanges::default(), 11, &quad, &fd).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(stats.requested, 10);
        for s in &a {
            let (lo, hi) = s.theta.call_bounds();
            assert!(s.price >= lo && s.price <= hi);
            assert!(s.grad.iter().all(|g| g.is_finite()));
            let again = label(&s.theta, &quad, &fd).unwrap();
            assert!((again.price - s.price).abs() <= 1e-12 * s.price.abs().max(1.0));
        }
        let mean = a.iter().map(|s| s.price).sum::<f64>() / a.len() as f64;
        assert!(mean.is_finite() && mean > 0.0);

        let (b, _) = build_dataset(10, &ParameterRanges::default(), 11, &quad, &fd).unwrap();
        assert_eq!(a, b);
    }
}
