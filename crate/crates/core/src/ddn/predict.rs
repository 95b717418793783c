use ndarray::Array2;

use super::network::{forward, input_gradient, Mode};
use super::NetworkState;
use crate::heston::PricingInput;
use crate::Result;

fn feature_matrix(state: &NetworkState, thetas: &[PricingInput]) -> Result<Array2<f64>> {
    let scalers = state.scalers()?;
    let rows: Vec<[f64; 9]> = thetas.iter().map(|t| scalers.normalize_features(t)).collect();
    Ok(Array2::from_shape_fn((rows.len(), 9), |(i, j)| rows[i][j]))
}

/// Network price in currency units.
pub fn predict_price(state: &NetworkState, theta: &PricingInput) -> Result<f64> {
    Ok(predict_prices(state, std::slice::from_ref(theta))?[0])
}

/// Network price and its sensitivities to `(kappa, lambda, sigma, rho, v0)`
/// in raw units.
pub fn predict_with_gradient(state: &NetworkState, theta: &PricingInput) -> Result<(f64, [f64; 5])> {
    let (p, g) = predict_batch(state, std::slice::from_ref(theta))?;
    Ok((p[0], g[0]))
}

pub fn predict_prices(state: &NetworkState, thetas: &[PricingInput]) -> Result<Vec<f64>> {
    let scalers = state.scalers()?;
    let x = feature_matrix(state, thetas)?;
    let (out, _) = forward(state, x.view(), Mode::Eval)?;
    Ok(out.iter().map(|&p| scalers.denormalize_price(p)).collect())
}

/// Batched [`predict_with_gradient`].
pub fn predict_batch(state: &NetworkState, thetas: &[PricingInput]) -> Result<(Vec<f64>, Vec<[f64; 5]>)> {
    let scalers = state.scalers()?;
    let x = feature_matrix(state, thetas)?;
    let (out, trace) = forward(state, x.view(), Mode::Eval)?;
    let g = input_gradient(state, &trace)?;
    let prices = out.iter().map(|&p| scalers.denormalize_price(p)).collect();
    let grads = g
        .rows()
        .into_iter()
        .map(|row| scalers.unscale_gradient(&std::array::from_fn(|j| row[j])))
        .collect();
    Ok((prices, grads))
}
