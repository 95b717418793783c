//! Deep differential network: a softplus multilayer perceptron trained on
//! prices and on its own input gradient.
//!
//! Layer `l` maps `y_{l-1}` to `x_l = y_{l-1} W_lᵀ + b_l` with
//! `W_l ∈ R^{N_l × N_{l-1}}`. Hidden layers apply `ψ` and, in training mode,
//! an inverted-dropout mask. A derivative-loss weight of zero gives the
//! plain feedforward baseline; in that case the input gradient is never
//! built during training.

mod activation;
mod adam;
mod io;
mod loss;
mod network;
mod predict;
mod train;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::dataset::Scalers;
use crate::rng::{seeded, stream};
use crate::{Error, Result};

pub use activation::Activation;
pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use io::{load_model, save_model, write_history_csv, HISTORY_HEADER};
pub use loss::{loss, param_gradients, Batch, LossBreakdown};
pub use network::{forward, input_gradient, ForwardTrace, Mode};
pub use predict::{predict_batch, predict_price, predict_prices, predict_with_gradient};
pub use train::{evaluate, train, EpochRecord, TrainOutcome};

/// How `Ξ` enters the regularised loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    /// `η ‖Ξ‖²`
    L2sq,
    /// `η ‖Ξ‖`
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Input width 9, hidden widths, output width 1.
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub output_activation: Activation,
    /// Softplus slope.
    pub beta: f64,
    pub dropout_rate: f64,
    pub deriv_loss_weight: f64,
    pub reg_coefficient: f64,
    pub penalty: Penalty,
    pub lr0: f64,
    pub lr_decay: f64,
    pub decay_every: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Set from the run's global seed rather than from this section.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let mut layer_sizes = vec![9];
        layer_sizes.extend([150; 6]);
        layer_sizes.push(1);
        Self {
            layer_sizes,
            activation: Activation::Softplus,
            output_activation: Activation::Linear,
            beta: 1.0,
            dropout_rate: 0.2,
            deriv_loss_weight: 1.0,
            reg_coefficient: 1e-5,
            penalty: Penalty::L2sq,
            lr0: 1e-3,
            lr_decay: 0.9,
            decay_every: 10,
            batch_size: 256,
            epochs: 200,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    /// Default architecture with `hidden` layers of `width` nodes.
    pub fn with_hidden(hidden: usize, width: usize) -> Self {
        let mut layer_sizes = vec![9];
        layer_sizes.extend(std::iter::repeat_n(width, hidden));
        layer_sizes.push(1);
        Self {
            layer_sizes,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let n = self.layer_sizes.len();
        if n < 2 || self.layer_sizes[0] != 9 || self.layer_sizes[n - 1] != 1 {
            return bad(format!(
                "layer_sizes must start with 9 and end with 1, got {:?}",
                self.layer_sizes
            ));
        }
        if self.layer_sizes.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate must lie in [0, 1), got {}", self.dropout_rate));
        }
        if !(self.deriv_loss_weight >= 0.0 && self.deriv_loss_weight.is_finite()) {
            return bad(format!("deriv_loss_weight must be nonnegative, got {}", self.deriv_loss_weight));
        }
        if !(self.reg_coefficient >= 0.0 && self.reg_coefficient.is_finite()) {
            return bad(format!("reg_coefficient must be nonnegative, got {}", self.reg_coefficient));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 must be positive, got {}", self.lr0));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay));
        }
        if self.decay_every == 0 || self.batch_size == 0 || self.epochs == 0 {
            return bad("decay_every, batch_size and epochs must be positive".into());
        }
        Ok(())
    }

    /// `lr0 · lr_decay^⌊epoch / decay_every⌋`, epochs counted from zero.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.lr0 * self.lr_decay.powi((epoch / self.decay_every) as i32)
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// True when the derivative term takes part in training.
    pub fn is_differential(&self) -> bool {
        self.deriv_loss_weight > 0.0
    }
}

/// Weights and biases `Ξ` plus everything needed to resume or predict.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub config: NetworkConfig,
    pub scalers: Option<Scalers>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    /// Completed training epochs.
    pub epoch: usize,
    pub adam: AdamState,
}

/// One array per weight matrix and bias vector, shaped like the state.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(state: &NetworkState) -> Self {
        Self {
            weights: state.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: state.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().flat_map(|w| w.iter()).chain(self.biases.iter().flat_map(|b| b.iter()))
    }
}

/// Xavier-Glorot uniform weights on `±sqrt(6 / (fan_in + fan_out))` and
/// zero biases.
pub fn init_xavier(config: &NetworkConfig, seed: u64) -> Result<NetworkState> {
    config.validate()?;
    let mut rng = seeded(seed, stream::INIT);
    let mut weights = Vec::with_capacity(config.n_layers());
    let mut biases = Vec::with_capacity(config.n_layers());
    for pair in config.layer_sizes.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        weights.push(Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-a..a)));
        biases.push(Array1::zeros(fan_out));
    }
    let mut state = NetworkState {
        config: config.clone(),
        scalers: None,
        weights,
        biases,
        epoch: 0,
        adam: AdamState::default(),
    };
    state.adam = AdamState::zeros_like(&state);
    Ok(state)
}

impl NetworkState {
    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().flat_map(|w| w.iter()).chain(self.biases.iter().flat_map(|b| b.iter()))
    }

    /// `‖Ξ‖²` over every weight and bias.
    pub fn squared_norm(&self) -> f64 {
        self.params().map(|x| x * x).sum()
    }

    /// Inverted-dropout masks for one batch: each hidden unit is kept with
    /// probability `1 - p` and scaled by `1 / (1 - p)`.
    pub fn draw_masks<R: Rng>(&self, batch: usize, rng: &mut R) -> Vec<Array2<f64>> {
        let p = self.config.dropout_rate;
        let keep = 1.0 / (1.0 - p);
        let hidden = &self.config.layer_sizes[1..self.config.layer_sizes.len() - 1];
        hidden
            .iter()
            .map(|&n| {
                Array2::from_shape_simple_fn((batch, n), || {
                    let u: f64 = rng.random();
                    if u < p {
                        0.0
                    } else {
                        keep
                    }
                })
            })
            .collect()
    }

    pub fn scalers(&self) -> Result<&Scalers> {
        self.scalers
            .as_ref()
            .ok_or_else(|| Error::Format("model has no scalers; it was never trained".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matches_selected_hyperparameters() {
        let c = NetworkConfig::default();
        assert_eq!(c.layer_sizes, vec![9, 150, 150, 150, 150, 150, 150, 1]);
        assert_eq!((c.lr0, c.lr_decay, c.batch_size, c.epochs, c.dropout_rate), (1e-3, 0.9, 256, 200, 0.2));
        assert!(c.validate().is_ok());
        assert_eq!(NetworkConfig::with_hidden(6, 150), c);
    }

    #[test]
    fn schedule_steps_every_decade() {
        let c = NetworkConfig::default();
        assert_eq!(c.learning_rate(0), 1e-3);
        assert_eq!(c.learning_rate(9), 1e-3);
        assert!((c.learning_rate(10) - 0.9e-3).abs() < 1e-18);
        assert!((c.learning_rate(25) - 0.81e-3).abs() < 1e-18);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = NetworkConfig::default();
        c.layer_sizes = vec![8, 10, 1];
        assert!(c.validate().is_err());
        let mut c = NetworkConfig::default();
        c.dropout_rate = 1.0;
        assert!(c.validate().is_err());
        let mut c = NetworkConfig::default();
        c.lr_decay = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn xavier_variance_and_zero_bias() {
        let c = NetworkConfig::default();
        let s = init_xavier(&c, 7).unwrap();
        for (l, w) in s.weights.iter().enumerate() {
            let (n_out, n_in) = w.dim();
            assert_eq!((n_in, n_out), (c.layer_sizes[l], c.layer_sizes[l + 1]));
            if n_in == 150 && n_out == 150 {
                let var = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
                let target = 2.0 / 300.0;
                assert!((var / target - 1.0).abs() < 0.2, "layer {l}: {var}");
            }
        }
        assert!(s.biases.iter().all(|b| b.iter().all(|&x| x == 0.0)));
        assert_eq!(s, init_xavier(&c, 7).unwrap());
        assert_ne!(s.weights[0], init_xavier(&c, 8).unwrap().weights[0]);
    }

    #[test]
    fn masks_are_inverted_dropout() {
        let c = NetworkConfig::default();
        let s = init_xavier(&c, 1).unwrap();
        let m = s.draw_masks(400, &mut seeded(1, stream::DROPOUT));
        assert_eq!(m.len(), 6);
        let all: Vec<f64> = m.iter().flat_map(|a| a.iter().copied()).collect();
        assert!(all.iter().all(|&x| x == 0.0 || x == 1.25));
        let kept = all.iter().filter(|&&x| x > 0.0).count() as f64 / all.len() as f64;
        assert!((kept - 0.8).abs() < 0.01, "{kept}");
    }
}
