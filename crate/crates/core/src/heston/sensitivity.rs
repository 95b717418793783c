use serde::{Deserialize, Serialize};

use super::pricing::{degenerate_price, fourier_grid, price_on_grid};
use super::quadrature::FourierGrid;
use super::{HestonParams, PricingInput, QuadratureConfig, PARAM_NAMES};
use crate::{Error, Result};

/// Step policy for the finite-difference sensitivities: `h = max(h_rel |x|, h_abs)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiniteDiffConfig {
    pub h_rel: f64,
    pub h_abs: f64,
}

impl Default for FiniteDiffConfig {
    fn default() -> Self {
        Self {
            h_rel: 1e-4,
            h_abs: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stencil {
    Central,
    Forward,
    Backward,
}

/// Admissible interval of each parameter: kappa and sigma strictly
/// positive, lambda and v0 nonnegative, rho in [-1, 1].
fn stencil_for(index: usize, x: f64, h: f64) -> Stencil {
    match index {
        0 | 2 if x - 2.0 * h <= 0.0 => Stencil::Forward,
        1 | 4 if x - 2.0 * h < 0.0 => Stencil::Forward,
        3 if x + 2.0 * h > 1.0 => Stencil::Backward,
        3 if x - 2.0 * h < -1.0 => Stencil::Forward,
        _ => Stencil::Central,
    }
}

/// Central differences of the unclamped call price with respect to
/// `(kappa, lambda, sigma, rho, v0)`. Near the edge of a parameter's domain
/// the stencil switches to a one-sided second-order formula. All perturbed
/// prices share the quadrature rule of the unperturbed input so that the
/// differences are smooth in the parameters.
pub fn price_gradient(
    input: &PricingInput,
    quad: &QuadratureConfig,
    fd: &FiniteDiffConfig,
) -> Result<[f64; 5]> {
    input.validate()?;
    let base = input.heston.to_array();
    let grid = if degenerate_price(input).is_some() {
        None
    } else {
        Some(fourier_grid(input, quad)?)
    };

    let mut grad = [0.0; 5];
    for (i, g) in grad.iter_mut().enumerate() {
        let h = (fd.h_rel * base[i].abs()).max(fd.h_abs);
        let price_at = |offset: f64| -> Result<f64> {
            let mut p = base;
            p[i] += offset;
            let shifted = input.with_heston(HestonParams::from_array(p));
            price_with(&shifted, grid.as_ref(), quad)
        };
        let wrap = |e: Error| Error::Gradient {
            component: PARAM_NAMES[i],
            source: Box::new(e),
        };
        *g = match stencil_for(i, base[i], h) {
            Stencil::Central => (price_at(h).map_err(wrap)? - price_at(-h).map_err(wrap)?) / (2.0 * h),
            Stencil::Forward => {
                let f0 = price_at(0.0).map_err(wrap)?;
                (-3.0 * f0 + 4.0 * price_at(h).map_err(wrap)? - price_at(2.0 * h).map_err(wrap)?) / (2.0 * h)
            }
            Stencil::Backward => {
                let f0 = price_at(0.0).map_err(wrap)?;
                (3.0 * f0 - 4.0 * price_at(-h).map_err(wrap)? + price_at(-2.0 * h).map_err(wrap)?) / (2.0 * h)
            }
        };
        if !g.is_finite() {
            return Err(wrap(Error::Numerical("non-finite difference quotient".into())));
        }
    }
    Ok(grad)
}

fn price_with(input: &PricingInput, grid: Option<&FourierGrid>, quad: &QuadratureConfig) -> Result<f64> {
    input.validate()?;
    if let Some(p) = degenerate_price(input) {
        return Ok(p);
    }
    match grid {
        Some(g) => price_on_grid(input, g),
        // the unperturbed point is degenerate; perturbed ones get their own rule
        None => {
            let g = fourier_grid(input, quad)?;
            price_on_grid(input, &g)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heston::call_price;

    fn reference() -> PricingInput {
        PricingInput::new(HestonParams::new(2.0, 0.09, 0.3, -0.5, 0.09), 100.0, 0.03, 0.5, 100.0)
    }

    #[test]
    fn stencil_choice() {
        assert_eq!(stencil_for(0, 2.0, 2e-4), Stencil::Central);
        assert_eq!(stencil_for(1, 0.0, 1e-6), Stencil::Forward);
        assert_eq!(stencil_for(4, 1e-7, 1e-6), Stencil::Forward);
        assert_eq!(stencil_for(3, 1.0, 1e-4), Stencil::Backward);
        assert_eq!(stencil_for(3, -1.0, 1e-4), Stencil::Forward);
        assert_eq!(stencil_for(3, -0.5, 5e-5), Stencil::Central);
    }

    #[test]
    fn atm_vega_positive_and_lambda_nonnegative() {
        let quad = QuadratureConfig::default();
        let fd = FiniteDiffConfig::default();
        for heston in [
            HestonParams::new(2.0, 0.09, 0.3, -0.5, 0.09),
            HestonParams::new(0.2, 0.5, 0.9, -0.9, 0.3),
            HestonParams::new(4.5, 0.02, 0.15, 0.0, 0.01),
        ] {
            let g = price_gradient(&reference().with_heston(heston), &quad, &fd).unwrap();
            assert!(g[4] > 0.0, "{g:?}");
            assert!(g[1] >= 0.0, "{g:?}");
        }
    }

    #[test]
    fn boundary_values_use_one_sided_stencils() {
        let quad = QuadratureConfig::default();
        let fd = FiniteDiffConfig::default();
        for heston in [
            HestonParams::new(2.0, 0.0, 0.3, -0.5, 0.09),
            HestonParams::new(2.0, 0.09, 0.3, -0.5, 0.0),
        ] {
            let g = price_gradient(&reference().with_heston(heston), &quad, &fd).unwrap();
            assert!(g.iter().all(|x| x.is_finite()), "{g:?}");
            assert!(g[1] > 0.0 && g[4] > 0.0, "{g:?}");
        }

        let inp = reference().with_heston(HestonParams::new(2.0, 0.09, 0.3, -1.0, 0.09));
        let g = price_gradient(&inp, &quad, &fd).unwrap();
        assert!(g.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn matches_plain_differences_of_call_price() {
        let quad = QuadratureConfig::default();
        let inp = reference();
        let g = price_gradient(&inp, &quad, &FiniteDiffConfig::default()).unwrap();
        let h = 1e-3;
        let mut p = inp.heston.to_array();
        p[4] += h;
        let up = call_price(&inp.with_heston(HestonParams::from_array(p)), &quad).unwrap();
        p[4] -= 2.0 * h;
        let dn = call_price(&inp.with_heston(HestonParams::from_array(p)), &quad).unwrap();
        let fd = (up - dn) / (2.0 * h);
        assert!((g[4] - fd).abs() < 1e-4 * fd.abs());
    }
}
