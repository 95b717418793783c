//! Fitting the five Heston parameters to call quotes.
//!
//! All methods minimise the mean squared price error in currency units over
//! the feasible box, reached through a sigmoid transform, from the same
//! Latin-hypercube start points. The network methods run Adam on the
//! network's own input gradient; the benchmark runs Nelder-Mead on the
//! Fourier pricer.

mod market;
mod nelder_mead;
mod transform;

use std::fmt;
use std::time::{Duration, Instant};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddn::{predict_batch, predict_prices, NetworkState};
use crate::heston::{call_price, HestonParams, QuadratureConfig};
use crate::{Error, Result};

pub use market::{
    filter_quotes, load_quotes, load_rate_curve, synthetic_market, write_quotes, write_rate_curve, MarketGrid,
    MarketQuote, RateCurve, DAYS_PER_YEAR,
};
pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult, Termination};
pub use transform::BoxTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ddn,
    Fnn,
    NelderMead,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ddn => "ddn",
            Method::Fnn => "fnn",
            Method::NelderMead => "nelder-mead",
        })
    }
}

/// Adam settings for the network calibrations, in `z` space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamCalibration {
    pub lr: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
}

impl Default for AdamCalibration {
    fn default() -> Self {
        Self {
            lr: 0.05,
            max_iter: 2000,
            grad_tol: 1e-7,
            step_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub n_starts: usize,
    /// Set from the run's global seed rather than from this section.
    #[serde(skip)]
    pub seed: u64,
    pub adam: AdamCalibration,
    pub nelder_mead: NelderMeadOptions,
    /// Quotes at or below this price are left out of the relative error.
    pub mre_floor: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            n_starts: 5,
            seed: 0,
            adam: AdamCalibration::default(),
            nelder_mead: NelderMeadOptions::default(),
            mre_floor: 1e-4,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        if self.n_starts == 0 || a.max_iter == 0 || self.nelder_mead.max_iter == 0 {
            return Err(Error::Config("n_starts and iteration limits must be positive".into()));
        }
        if !(a.lr > 0.0 && a.grad_tol >= 0.0 && a.step_tol >= 0.0 && self.mre_floor >= 0.0) {
            return Err(Error::Config("calibration rates and tolerances must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Model prices for a set of quotes at given Heston parameters.
pub trait Pricer {
    fn prices(&self, heston: HestonParams, quotes: &[MarketQuote]) -> Result<Vec<f64>>;
}

/// The Fourier pricer.
#[derive(Debug, Clone, Copy, Default)]
pub struct FourierPricer {
    pub quad: QuadratureConfig,
}

impl Pricer for FourierPricer {
    fn prices(&self, heston: HestonParams, quotes: &[MarketQuote]) -> Result<Vec<f64>> {
        quotes.iter().map(|q| call_price(&q.pricing_input(heston), &self.quad)).collect()
    }
}

/// A trained network used as a pricer.
#[derive(Debug, Clone, Copy)]
pub struct NetworkPricer<'a>(pub &'a NetworkState);

impl Pricer for NetworkPricer<'_> {
    fn prices(&self, heston: HestonParams, quotes: &[MarketQuote]) -> Result<Vec<f64>> {
        let inputs: Vec<_> = quotes.iter().map(|q| q.pricing_input(heston)).collect();
        predict_prices(self.0, &inputs)
    }
}

fn mse(model: &[f64], quotes: &[MarketQuote]) -> f64 {
    model.iter().zip(quotes).map(|(p, q)| (p - q.price_mkt).powi(2)).sum::<f64>() / quotes.len() as f64
}

/// `(1/M) Σ (f_m(θ) - p_m)²` in currency units.
pub fn objective(heston: HestonParams, quotes: &[MarketQuote], pricer: &impl Pricer) -> Result<f64> {
    if quotes.is_empty() {
        return Err(Error::InvalidInput("no quotes to calibrate against".into()));
    }
    Ok(mse(&pricer.prices(heston, quotes)?, quotes))
}

/// Mean relative error `(1/M) Σ |p̂_m - p_m| / p_m` over quotes priced
/// above `floor`.
pub fn mre(model_prices: &[f64], quotes: &[MarketQuote], floor: f64) -> Result<f64> {
    if model_prices.len() != quotes.len() {
        return Err(Error::InvalidInput("model and market price counts differ".into()));
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    for (p, q) in model_prices.iter().zip(quotes) {
        if q.price_mkt > floor {
            sum += (p - q.price_mkt).abs() / q.price_mkt;
            used += 1;
        }
    }
    if used < quotes.len() {
        warn!("{} quotes at or below {floor} left out of the relative error", quotes.len() - used);
    }
    if used == 0 {
        return Err(Error::InvalidInput("no quote is large enough for a relative error".into()));
    }
    Ok(sum / used as f64)
}

/// Objective and its gradient with respect to `z` for the network pricer.
pub fn network_objective(
    model: &NetworkState,
    quotes: &[MarketQuote],
    bx: &BoxTransform,
    z: &[f64; 5],
) -> Result<(f64, [f64; 5])> {
    let theta = bx.to_params(z);
    let inputs: Vec<_> = quotes.iter().map(|q| q.pricing_input(theta)).collect();
    let (prices, grads) = predict_batch(model, &inputs)?;
    let m = quotes.len() as f64;
    let mut f = 0.0;
    let mut g = [0.0; 5];
    for ((p, dp), q) in prices.iter().zip(&grads).zip(quotes) {
        let r = p - q.price_mkt;
        f += r * r;
        for i in 0..5 {
            g[i] += 2.0 * r * dp[i];
        }
    }
    let jac = bx.jacobian(z);
    let gz = std::array::from_fn(|i| g[i] / m * jac[i]);
    Ok((f / m, gz))
}

/// Outcome of one start point.
#[derive(Debug, Clone, PartialEq)]
pub struct StartReport {
    pub start: HestonParams,
    pub theta: HestonParams,
    pub objective: f64,
    pub iterations: usize,
    pub stop: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub method: Method,
    pub theta_star: HestonParams,
    pub objective: f64,
    pub mre: f64,
    /// Prices of the calibrating pricer at `theta_star`.
    pub model_prices: Vec<f64>,
    /// Model minus market, per quote.
    pub residuals: Vec<f64>,
    pub n_starts_used: usize,
    pub wall_time: Duration,
    pub starts: Vec<StartReport>,
}

fn adam_from(
    model: &NetworkState,
    quotes: &[MarketQuote],
    bx: &BoxTransform,
    start: HestonParams,
    cfg: &AdamCalibration,
) -> StartReport {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    let mut z = bx.to_z(&start);
    let (mut m, mut v) = ([0.0; 5], [0.0; 5]);
    let mut best = (f64::INFINITY, z);
    let mut stop = "max-iter".to_string();
    let mut iterations = 0;
    for t in 1..=cfg.max_iter {
        iterations = t;
        let (f, g) = match network_objective(model, quotes, bx, &z) {
            Ok(r) if r.0.is_finite() && r.1.iter().all(|x| x.is_finite()) => r,
            Ok(_) => {
                stop = "non-finite".into();
                break;
            }
            Err(e) => {
                stop = format!("error: {e}");
                break;
            }
        };
        if f < best.0 {
            best = (f, z);
        }
        if g.iter().map(|x| x * x).sum::<f64>().sqrt() < cfg.grad_tol {
            stop = "gradient".into();
            break;
        }
        let (c1, c2) = (1.0 - B1.powi(t as i32), 1.0 - B2.powi(t as i32));
        let mut step_sq = 0.0;
        for i in 0..5 {
            m[i] = B1 * m[i] + (1.0 - B1) * g[i];
            v[i] = B2 * v[i] + (1.0 - B2) * g[i] * g[i];
            let step = cfg.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + EPS);
            z[i] -= step;
            step_sq += step * step;
        }
        if step_sq.sqrt() < cfg.step_tol {
            if let Ok((f, _)) = network_objective(model, quotes, bx, &z) {
                if f < best.0 {
                    best = (f, z);
                }
            }
            stop = "step".into();
            break;
        }
    }
    StartReport {
        start,
        theta: bx.to_params(&best.1),
        objective: best.0,
        iterations,
        stop,
    }
}

fn select_best(method: Method, starts: Vec<StartReport>) -> Result<StartReport> {
    // lowest objective, ties to the earliest start
    starts
        .iter()
        .filter(|s| s.objective.is_finite())
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .cloned()
        .ok_or_else(|| {
            let detail: Vec<String> = starts.iter().enumerate().map(|(i, s)| format!("start {i}: {}", s.stop)).collect();
            Error::Calibration(format!("every {method} start failed ({})", detail.join("; ")))
        })
}

fn finish(
    method: Method,
    quotes: &[MarketQuote],
    pricer: &impl Pricer,
    starts: Vec<StartReport>,
    cfg: &CalibrationConfig,
    clock: Instant,
) -> Result<CalibrationResult> {
    let best = select_best(method, starts.clone())?;
    let model_prices = pricer.prices(best.theta, quotes)?;
    let wall_time = clock.elapsed();
    let residuals: Vec<f64> = model_prices.iter().zip(quotes).map(|(p, q)| p - q.price_mkt).collect();
    let result = CalibrationResult {
        method,
        theta_star: best.theta,
        objective: mse(&model_prices, quotes),
        mre: mre(&model_prices, quotes, cfg.mre_floor)?,
        model_prices,
        residuals,
        n_starts_used: starts.len(),
        wall_time,
        starts,
    };
    info!(
        "{method}: objective {:.4e}, MRE {:.4}, {:.2?}",
        result.objective, result.mre, result.wall_time
    );
    Ok(result)
}

fn calibrate_network(
    method: Method,
    quotes: &[MarketQuote],
    model: &NetworkState,
    cfg: &CalibrationConfig,
    bx: &BoxTransform,
) -> Result<CalibrationResult> {
    cfg.validate()?;
    if quotes.is_empty() {
        return Err(Error::InvalidInput("no quotes to calibrate against".into()));
    }
    model.scalers()?;
    let clock = Instant::now();
    let starts: Vec<StartReport> = bx
        .start_points(cfg.n_starts, cfg.seed)
        .into_par_iter()
        .map(|s| adam_from(model, quotes, bx, s, &cfg.adam))
        .collect();
    finish(method, quotes, &NetworkPricer(model), starts, cfg, clock)
}

/// Multistart Adam on the differential network.
pub fn calibrate_ddn(
    quotes: &[MarketQuote],
    model: &NetworkState,
    cfg: &CalibrationConfig,
    bx: &BoxTransform,
) -> Result<CalibrationResult> {
    calibrate_network(Method::Ddn, quotes, model, cfg, bx)
}

/// The same procedure on a network trained without the derivative term.
pub fn calibrate_fnn(
    quotes: &[MarketQuote],
    model: &NetworkState,
    cfg: &CalibrationConfig,
    bx: &BoxTransform,
) -> Result<CalibrationResult> {
    if model.config.is_differential() {
        warn!("the feedforward calibration was given a model trained with a derivative term");
    }
    calibrate_network(Method::Fnn, quotes, model, cfg, bx)
}

/// Multistart Nelder-Mead on the Fourier pricer in `z` space. A failed
/// pricing counts as an infinite objective.
pub fn calibrate_nm(
    quotes: &[MarketQuote],
    quad: &QuadratureConfig,
    cfg: &CalibrationConfig,
    bx: &BoxTransform,
) -> Result<CalibrationResult> {
    cfg.validate()?;
    if quotes.is_empty() {
        return Err(Error::InvalidInput("no quotes to calibrate against".into()));
    }
    let pricer = FourierPricer { quad: *quad };
    let clock = Instant::now();
    let starts: Vec<StartReport> = bx
        .start_points(cfg.n_starts, cfg.seed)
        .into_par_iter()
        .map(|start| {
            let f = |z: &[f64]| {
                let z: [f64; 5] = z.try_into().expect("five coordinates");
                objective(bx.to_params(&z), quotes, &pricer).unwrap_or(f64::INFINITY)
            };
            let r = nelder_mead(f, &bx.to_z(&start), &cfg.nelder_mead);
            StartReport {
                start,
                theta: bx.to_params(&r.x.clone().try_into().expect("five coordinates")),
                objective: r.f,
                iterations: r.iterations,
                stop: format!("{:?}", r.termination),
            }
        })
        .collect();
    finish(Method::NelderMead, quotes, &pricer, starts, cfg, clock)
}

/// Runs all three methods on the same quotes and start points.
pub fn benchmark(
    quotes: &[MarketQuote],
    ddn: &NetworkState,
    fnn: &NetworkState,
    quad: &QuadratureConfig,
    cfg: &CalibrationConfig,
    bx: &BoxTransform,
) -> Result<Vec<CalibrationResult>> {
    Ok(vec![
        calibrate_nm(quotes, quad, cfg, bx)?,
        calibrate_fnn(quotes, fnn, cfg, bx)?,
        calibrate_ddn(quotes, ddn, cfg, bx)?,
    ])
}
