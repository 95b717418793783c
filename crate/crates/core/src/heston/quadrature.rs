use std::collections::HashMap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Settings of the Fourier-inversion quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Gauss-Legendre nodes per panel.
    pub n_nodes: usize,
    /// Truncation point of the base integration range `[0, u_max]`.
    pub u_max: f64,
    /// Largest admissible integrand envelope at the truncation point,
    /// relative to spot.
    pub tail_tol: f64,
    /// How many times the range may be doubled when the envelope at
    /// `u_max` is still above `tail_tol`.
    pub max_doublings: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            n_nodes: 128,
            u_max: 200.0,
            tail_tol: 1e-9,
            max_doublings: 6,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 32 {
            return Err(Error::Config(format!(
                "quadrature needs at least 32 nodes, got {}",
                self.n_nodes
            )));
        }
        if !(self.u_max.is_finite() && self.u_max > 0.0) {
            return Err(Error::Config(format!("u_max must be positive, got {}", self.u_max)));
        }
        if !(self.tail_tol > 0.0) {
            return Err(Error::Config("tail_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Nodes and weights on `[-1, 1]`, cached per order.
pub(crate) fn legendre_rule(n: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| {
            let degree = NonZeroUsize::new(n).expect("quadrature order is nonzero");
            Arc::new(GaussLegendre::new(degree).as_node_weight_pairs().to_vec())
        })
        .clone()
}

/// Composite Gauss-Legendre rule on `[0, u_end]`.
#[derive(Debug, Clone)]
pub(crate) struct FourierGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub u_end: f64,
}

impl FourierGrid {
    /// Builds the rule for an integrand oscillating at roughly `freq`
    /// radians per unit `u`, extending the range by doubling while
    /// `envelope(u_end)` stays above the tolerance.
    pub fn build<F>(quad: &QuadratureConfig, freq: f64, mut envelope: F) -> Result<Self>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let rule = legendre_rule(quad.n_nodes);
        let mut grid = FourierGrid {
            nodes: Vec::new(),
            weights: Vec::new(),
            u_end: 0.0,
        };
        grid.push_segment(&rule, 0.0, quad.u_max, freq);

        let mut doublings = 0;
        loop {
            let tail = envelope(grid.u_end)?;
            if tail <= quad.tail_tol {
                return Ok(grid);
            }
            if doublings == quad.max_doublings {
                return Err(Error::Truncation {
                    tail,
                    tol: quad.tail_tol,
                    u_end: grid.u_end,
                });
            }
            let a = grid.u_end;
            grid.push_segment(&rule, a, 2.0 * a, freq);
            doublings += 1;
        }
    }

    /// Splits `[a, b]` into enough panels that each one carries at most
    /// `n / 2` oscillation periods.
    fn push_segment(&mut self, rule: &[(f64, f64)], a: f64, b: f64, freq: f64) {
        let n = rule.len() as f64;
        let periods = (b - a) * freq / (2.0 * PI);
        let panels = ((2.0 * periods / n).ceil() as usize).max(1);
        let width = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * width;
            let half = 0.5 * width;
            let mid = lo + half;
            for &(x, w) in rule {
                self.nodes.push(mid + half * x);
                self.weights.push(half * w);
            }
        }
        self.u_end = b;
    }

    pub fn integrate<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let mut acc = 0.0;
        for (&u, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(u)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials() {
        let rule = legendre_rule(32);
        let s: f64 = rule.iter().map(|&(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn grid_resolves_oscillation() {
        let quad = QuadratureConfig::default();
        let grid = FourierGrid::build(&quad, 11.0, |_| Ok(0.0)).unwrap();
        assert!(grid.nodes.len() > quad.n_nodes);
        let got = grid.integrate(|u| Ok((10.0 * u).cos() * (-u / 50.0).exp())).unwrap();
        // closed form of the damped cosine integral on [0, 200]
        let a = 1.0 / 50.0;
        let b = 10.0f64;
        let f = |u: f64| (-a * u).exp() * (b * (b * u).sin() - a * (b * u).cos()) / (a * a + b * b);
        assert!((got - (f(200.0) - f(0.0))).abs() < 1e-12);
    }

    #[test]
    fn grid_extends_until_envelope_small() {
        let quad = QuadratureConfig::default();
        let grid = FourierGrid::build(&quad, 1.0, |u| Ok((-u / 100.0).exp())).unwrap();
        assert_eq!(grid.u_end, 3200.0);

        let err = FourierGrid::build(&quad, 1.0, |_| Ok(1.0)).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn validation() {
        assert!(QuadratureConfig::default().validate().is_ok());
        let bad = QuadratureConfig {
            n_nodes: 16,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
