use std::f64::consts::PI;

use num_complex::Complex64;

use super::quadrature::FourierGrid;
use super::{characteristic_function, PricingInput, QuadratureConfig};
use crate::Result;

/// Heston call price, clamped to its no-arbitrage interval.
pub fn call_price(input: &PricingInput, quad: &QuadratureConfig) -> Result<f64> {
    let raw = call_price_unclamped(input, quad)?;
    let (lo, hi) = input.call_bounds();
    Ok(raw.clamp(lo, hi))
}

/// Put price from put-call parity on the unclamped call, then clamped.
pub fn put_price(input: &PricingInput, quad: &QuadratureConfig) -> Result<f64> {
    let call = call_price_unclamped(input, quad)?;
    let put = call - input.s0 + input.k * input.discount();
    let (lo, hi) = input.put_bounds();
    Ok(put.clamp(lo, hi))
}

/// `S0 P1 - K e^{-r tau} P2` before clamping, so that quadrature noise around
/// the bounds stays visible.
pub fn call_price_unclamped(input: &PricingInput, quad: &QuadratureConfig) -> Result<f64> {
    input.validate()?;
    if let Some(p) = degenerate_price(input) {
        return Ok(p);
    }
    let grid = fourier_grid(input, quad)?;
    price_on_grid(input, &grid)
}

/// With no initial and no long-run variance the terminal price is the
/// forward and the integrand never decays.
pub(super) fn degenerate_price(input: &PricingInput) -> Option<f64> {
    (input.heston.v0 == 0.0 && input.heston.lambda == 0.0)
        .then(|| (input.s0 - input.k * input.discount()).max(0.0))
}

pub(super) fn fourier_grid(input: &PricingInput, quad: &QuadratureConfig) -> Result<FourierGrid> {
    quad.validate()?;
    // e^{-iku} combines with the i u log S0 term of the characteristic
    // function into the log-forward-moneyness frequency; the extra unit
    // covers the phase of the characteristic function itself.
    let moneyness = (input.s0 / input.k).ln() + input.r * input.tau;
    let freq = moneyness.abs() + 1.0;
    let scale = input.discount() / (PI * input.s0);
    FourierGrid::build(quad, freq, |u| {
        let a = characteristic_function(Complex64::new(u, -1.0), input)?;
        let b = characteristic_function(Complex64::new(u, 0.0), input)?;
        Ok(scale * (a.norm() + input.k * b.norm()) / u)
    })
}

/// Integrates both probabilities in one pass:
/// `C = (S0 - K e^{-r tau}) / 2 + e^{-r tau} / pi * int Re[e^{-iku} (phi(u - i) - K phi(u)) / (iu)] du`,
/// which equals `S0 P1 - K e^{-r tau} P2` with `P1` normalised by `phi(-i) = S0 e^{r tau}`.
pub(super) fn price_on_grid(input: &PricingInput, grid: &FourierGrid) -> Result<f64> {
    let log_k = input.k.ln();
    let integral = grid.integrate(|u| {
        let a = characteristic_function(Complex64::new(u, -1.0), input)?;
        let b = characteristic_function(Complex64::new(u, 0.0), input)?;
        let phase = Complex64::from_polar(1.0, -log_k * u);
        let z = phase * (a - input.k * b) / Complex64::new(0.0, u);
        Ok(z.re)
    })?;
    let disc = input.discount();
    Ok(0.5 * (input.s0 - input.k * disc) + disc / PI * integral)
}
