//! Semi-analytical Heston pricing.
//!
//! Prices come from the Fourier representation of the call price with the
//! branch-cut-safe form of the characteristic function; sensitivities to the
//! five unobservable parameters are taken by finite differences of that
//! price.

mod pricing;
mod quadrature;
mod sensitivity;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use pricing::{call_price, call_price_unclamped, put_price};
pub use quadrature::QuadratureConfig;
pub use sensitivity::{price_gradient, FiniteDiffConfig};

/// Names of the five model parameters, in the order used everywhere.
pub const PARAM_NAMES: [&str; 5] = ["kappa", "lambda", "sigma", "rho", "v0"];

/// Shortest maturity the pricer accepts, in years.
pub const MIN_TAU: f64 = 1e-6;

/// The five unobservable Heston parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    /// Mean-reversion speed of the variance.
    pub kappa: f64,
    /// Long-run variance.
    pub lambda: f64,
    /// Volatility of variance.
    pub sigma: f64,
    /// Correlation between asset and variance shocks.
    pub rho: f64,
    /// Initial variance.
    pub v0: f64,
}

impl HestonParams {
    pub fn new(kappa: f64, lambda: f64, sigma: f64, rho: f64, v0: f64) -> Self {
        Self {
            kappa,
            lambda,
            sigma,
            rho,
            v0,
        }
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.kappa, self.lambda, self.sigma, self.rho, self.v0]
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.kappa.is_finite()
            && self.kappa > 0.0
            && self.lambda.is_finite()
            && self.lambda >= 0.0
            && self.sigma.is_finite()
            && self.sigma > 0.0
            && (-1.0..=1.0).contains(&self.rho)
            && self.v0.is_finite()
            && self.v0 >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "Heston parameters out of domain: {self:?}"
            )))
        }
    }

    /// Whether `2 kappa lambda >= sigma^2`. Informational only.
    pub fn feller_satisfied(&self) -> bool {
        2.0 * self.kappa * self.lambda >= self.sigma * self.sigma
    }
}

/// Heston parameters together with the contract and market data of one call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingInput {
    pub heston: HestonParams,
    /// Spot price.
    pub s0: f64,
    /// Continuously compounded risk-free rate.
    pub r: f64,
    /// Time to maturity in years.
    pub tau: f64,
    /// Strike.
    pub k: f64,
}

impl PricingInput {
    pub fn new(heston: HestonParams, s0: f64, r: f64, tau: f64, k: f64) -> Self {
        Self {
            heston,
            s0,
            r,
            tau,
            k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.heston.validate()?;
        if !(self.s0.is_finite() && self.s0 > 0.0) {
            return Err(Error::InvalidInput(format!("spot must be positive, got {}", self.s0)));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::InvalidInput(format!("strike must be positive, got {}", self.k)));
        }
        if !self.r.is_finite() {
            return Err(Error::InvalidInput("rate must be finite".into()));
        }
        if !(self.tau.is_finite() && self.tau >= MIN_TAU) {
            return Err(Error::InvalidInput(format!(
                "maturity must be at least {MIN_TAU} years, got {}",
                self.tau
            )));
        }
        Ok(())
    }

    pub fn with_heston(&self, heston: HestonParams) -> Self {
        Self { heston, ..*self }
    }

    pub fn discount(&self) -> f64 {
        (-self.r * self.tau).exp()
    }

    /// No-arbitrage interval `[max(S0 - K e^{-r tau}, 0), S0]` for the call.
    pub fn call_bounds(&self) -> (f64, f64) {
        ((self.s0 - self.k * self.discount()).max(0.0), self.s0)
    }

    /// No-arbitrage interval `[max(K e^{-r tau} - S0, 0), K e^{-r tau}]` for the put.
    pub fn put_bounds(&self) -> (f64, f64) {
        let dk = self.k * self.discount();
        ((dk - self.s0).max(0.0), dk)
    }
}

/// Characteristic function of `log S_tau` under the pricing measure.
///
/// Uses the formulation with `g = (b - d) / (b + d)` and `exp(-d tau)`, which
/// keeps the complex logarithm on its principal branch for real arguments.
pub fn characteristic_function(u: Complex64, input: &PricingInput) -> Result<Complex64> {
    let phi = log_characteristic(u, input).exp();
    if phi.re.is_finite() && phi.im.is_finite() {
        Ok(phi)
    } else {
        Err(Error::Overflow { re: u.re, im: u.im })
    }
}

pub(crate) fn log_characteristic(u: Complex64, input: &PricingInput) -> Complex64 {
    let HestonParams {
        kappa,
        lambda,
        sigma,
        rho,
        v0,
    } = input.heston;
    let i = Complex64::i();
    let sigma2 = sigma * sigma;

    let b = kappa - i * rho * sigma * u;
    let d = (b * b + sigma2 * (i * u + u * u)).sqrt();
    let g = (b - d) / (b + d);
    let e = (-d * input.tau).exp();

    let c = i * input.r * u * input.tau
        + kappa * lambda / sigma2 * ((b - d) * input.tau - 2.0 * ((1.0 - g * e) / (1.0 - g)).ln());
    let dd = (b - d) / sigma2 * ((1.0 - e) / (1.0 - g * e));

    c + dd * v0 + i * u * input.s0.ln()
}
