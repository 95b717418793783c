use serde::{Deserialize, Serialize};

use super::{DatasetSplit, LabeledSample};
use crate::heston::PricingInput;
use crate::{Error, Result};

/// Network feature order: the five Heston parameters, then `S0, r, tau, K`.
pub const FEATURE_NAMES: [&str; 9] = ["kappa", "lambda", "sigma", "rho", "v0", "s0", "r", "tau", "k"];

pub fn features(theta: &PricingInput) -> [f64; 9] {
    let h = &theta.heston;
    [h.kappa, h.lambda, h.sigma, h.rho, h.v0, theta.s0, theta.r, theta.tau, theta.k]
}

/// Min-max statistics of the features and the price label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scalers {
    pub feature_min: [f64; 9],
    pub feature_max: [f64; 9],
    pub price_min: f64,
    pub price_max: f64,
}

/// A sample mapped to network units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedSample {
    pub features: [f64; 9],
    pub price: f64,
    /// Sensitivities in normalised units, `(span_i / price_span) * raw_i`.
    pub grad: [f64; 5],
}

/// Fits min-max scalers on the training partition only.
pub fn fit_scalers(samples: &[LabeledSample], split: &DatasetSplit) -> Result<Scalers> {
    if split.train.is_empty() {
        return Err(Error::InvalidInput("cannot fit scalers on an empty training set".into()));
    }
    let mut s = Scalers {
        feature_min: [f64::INFINITY; 9],
        feature_max: [f64::NEG_INFINITY; 9],
        price_min: f64::INFINITY,
        price_max: f64::NEG_INFINITY,
    };
    for &i in &split.train {
        let x = features(&samples[i].theta);
        for j in 0..9 {
            s.feature_min[j] = s.feature_min[j].min(x[j]);
            s.feature_max[j] = s.feature_max[j].max(x[j]);
        }
        s.price_min = s.price_min.min(samples[i].price);
        s.price_max = s.price_max.max(samples[i].price);
    }
    s.validate()?;
    Ok(s)
}

impl Scalers {
    pub fn validate(&self) -> Result<()> {
        for j in 0..9 {
            if !(self.feature_max[j] > self.feature_min[j]) {
                return Err(Error::InvalidInput(format!(
                    "feature {} is constant over the training set",
                    FEATURE_NAMES[j]
                )));
            }
        }
        if !(self.price_max > self.price_min) {
            return Err(Error::InvalidInput("price label is constant over the training set".into()));
        }
        Ok(())
    }

    pub fn feature_span(&self, j: usize) -> f64 {
        self.feature_max[j] - self.feature_min[j]
    }

    pub fn price_span(&self) -> f64 {
        self.price_max - self.price_min
    }

    pub fn normalize_features(&self, theta: &PricingInput) -> [f64; 9] {
        let x = features(theta);
        std::array::from_fn(|j| (x[j] - self.feature_min[j]) / self.feature_span(j))
    }

    pub fn denormalize_features(&self, x: &[f64; 9]) -> PricingInput {
        let raw: [f64; 9] = std::array::from_fn(|j| self.feature_min[j] + x[j] * self.feature_span(j));
        PricingInput::new(
            crate::heston::HestonParams::new(raw[0], raw[1], raw[2], raw[3], raw[4]),
            raw[5],
            raw[6],
            raw[7],
            raw[8],
        )
    }

    pub fn normalize_price(&self, p: f64) -> f64 {
        (p - self.price_min) / self.price_span()
    }

    pub fn denormalize_price(&self, p: f64) -> f64 {
        self.price_min + p * self.price_span()
    }

    /// Raw sensitivities to sensitivities in normalised units.
    pub fn scale_gradient(&self, raw: &[f64; 5]) -> [f64; 5] {
        std::array::from_fn(|i| self.feature_span(i) / self.price_span() * raw[i])
    }

    /// Inverse of [`Scalers::scale_gradient`].
    pub fn unscale_gradient(&self, scaled: &[f64; 5]) -> [f64; 5] {
        std::array::from_fn(|i| scaled[i] * self.price_span() / self.feature_span(i))
    }
}

pub fn normalize(sample: &LabeledSample, scalers: &Scalers) -> NormalizedSample {
    NormalizedSample {
        features: scalers.normalize_features(&sample.theta),
        price: scalers.normalize_price(sample.price),
        grad: scalers.scale_gradient(&sample.grad),
    }
}

impl NormalizedSample {
    pub fn denormalize(&self, scalers: &Scalers) -> LabeledSample {
        LabeledSample {
            theta: scalers.denormalize_features(&self.features),
            price: scalers.denormalize_price(self.price),
            grad: scalers.unscale_gradient(&self.grad),
        }
    }
}
