//! WebAssembly bindings for the static page in `www/`.
//!
//! Every export has a plain Rust twin returning `Result<_, String>` so the
//! logic can be tested natively; the exported wrappers only convert errors.

use heston_ddn::calibration::{
    mre, nelder_mead, objective, synthetic_market, BoxTransform, FourierPricer, MarketGrid, NelderMeadOptions,
    Pricer, RateCurve,
};
use heston_ddn::heston::{call_price, price_gradient, put_price, FiniteDiffConfig, HestonParams, PricingInput, QuadratureConfig};
use wasm_bindgen::prelude::*;

fn heston(p: &[f64]) -> Result<HestonParams, String> {
    let a: [f64; 5] = p.try_into().map_err(|_| format!("expected 5 Heston parameters, got {}", p.len()))?;
    let h = HestonParams::from_array(a);
    h.validate().map_err(|e| e.to_string())?;
    Ok(h)
}

/// `[call, put, d/dkappa, d/dlambda, d/dsigma, d/drho, d/dv0]`.
pub fn quote(params: &[f64], s0: f64, r: f64, tau: f64, k: f64) -> Result<Vec<f64>, String> {
    let input = PricingInput::new(heston(params)?, s0, r, tau, k);
    let quad = QuadratureConfig::default();
    let call = call_price(&input, &quad).map_err(|e| e.to_string())?;
    let put = put_price(&input, &quad).map_err(|e| e.to_string())?;
    let g = price_gradient(&input, &quad, &FiniteDiffConfig::default()).map_err(|e| e.to_string())?;
    let mut out = vec![call, put];
    out.extend(g);
    Ok(out)
}

/// Call prices on `n` equally spaced strikes, flattened as `[k0, c0, k1, c1, ...]`.
pub fn strike_curve(params: &[f64], s0: f64, r: f64, tau: f64, k_lo: f64, k_hi: f64, n: usize) -> Result<Vec<f64>, String> {
    if n < 2 || !(k_lo > 0.0 && k_hi > k_lo) {
        return Err("need at least two strikes and 0 < k_lo < k_hi".into());
    }
    let h = heston(params)?;
    let quad = QuadratureConfig::default();
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let k = k_lo + (k_hi - k_lo) * i as f64 / (n - 1) as f64;
        let c = call_price(&PricingInput::new(h, s0, r, tau, k), &quad).map_err(|e| e.to_string())?;
        out.extend([k, c]);
    }
    Ok(out)
}

/// Prices a 15-quote market at `params` with multiplicative noise and
/// fits it back by Nelder-Mead from one box start point.
///
/// Returns `[kappa, lambda, sigma, rho, v0, mse, mre, iterations]`.
pub fn fit_market(params: &[f64], noise: f64, seed: u64, max_iter: usize) -> Result<Vec<f64>, String> {
    let truth = heston(params)?;
    let quad = QuadratureConfig::default();
    let mut grid = MarketGrid::spaced(100.0, 5, (-0.15, 0.15), vec![60.0, 180.0, 365.0]);
    grid.noise = noise.max(0.0);
    grid.seed = seed;
    let quotes = synthetic_market(truth, &grid, &RateCurve::flat(0.02), &quad).map_err(|e| e.to_string())?;

    let bx = BoxTransform::default();
    let pricer = FourierPricer { quad };
    let start = bx.start_points(1, seed)[0];
    let opts = NelderMeadOptions {
        max_iter,
        ..Default::default()
    };
    let f = |z: &[f64]| {
        let z: [f64; 5] = z.try_into().expect("five coordinates");
        objective(bx.to_params(&z), &quotes, &pricer).unwrap_or(f64::INFINITY)
    };
    let res = nelder_mead(f, &bx.to_z(&start), &opts);
    let z: [f64; 5] = res.x.as_slice().try_into().expect("five coordinates");
    let fitted = bx.to_params(&z);
    let prices = pricer.prices(fitted, &quotes).map_err(|e| e.to_string())?;
    let rel = mre(&prices, &quotes, 1e-4).map_err(|e| e.to_string())?;
    let mut out = fitted.to_array().to_vec();
    out.extend([res.f, rel, res.iterations as f64]);
    Ok(out)
}

#[wasm_bindgen(js_name = quote)]
pub fn quote_js(params: &[f64], s0: f64, r: f64, tau: f64, k: f64) -> Result<Vec<f64>, JsError> {
    quote(params, s0, r, tau, k).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = strikeCurve)]
pub fn strike_curve_js(params: &[f64], s0: f64, r: f64, tau: f64, k_lo: f64, k_hi: f64, n: usize) -> Result<Vec<f64>, JsError> {
    strike_curve(params, s0, r, tau, k_lo, k_hi, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = fitMarket)]
pub fn fit_market_js(params: &[f64], noise: f64, seed: u32, max_iter: usize) -> Result<Vec<f64>, JsError> {
    fit_market(params, noise, seed as u64, max_iter).map_err(|e| JsError::new(&e))
}
