use ndarray::{Array1, Array2, Zip};

use super::{Gradients, NetworkState};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    /// Number of updates applied so far.
    pub t: u64,
    pub m_w: Vec<Array2<f64>>,
    pub v_w: Vec<Array2<f64>>,
    pub m_b: Vec<Array1<f64>>,
    pub v_b: Vec<Array1<f64>>,
}

impl AdamState {
    pub fn zeros_like(state: &NetworkState) -> Self {
        let g = Gradients::zeros_like(state);
        Self {
            t: 0,
            m_w: g.weights.clone(),
            v_w: g.weights,
            m_b: g.biases.clone(),
            v_b: g.biases,
        }
    }
}

/// One bias-corrected Adam update with learning rate `lr`.
pub fn adam_step(state: &mut NetworkState, grads: &Gradients, lr: f64) {
    let adam = &mut state.adam;
    adam.t += 1;
    let c1 = 1.0 - ADAM_BETA1.powi(adam.t as i32);
    let c2 = 1.0 - ADAM_BETA2.powi(adam.t as i32);
    let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
    };
    for l in 0..state.weights.len() {
        Zip::from(&mut state.weights[l])
            .and(&mut adam.m_w[l])
            .and(&mut adam.v_w[l])
            .and(&grads.weights[l])
            .for_each(|p, m, v, &g| update(p, m, v, g));
        Zip::from(&mut state.biases[l])
            .and(&mut adam.m_b[l])
            .and(&mut adam.v_b[l])
            .and(&grads.biases[l])
            .for_each(|p, m, v, &g| update(p, m, v, g));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddn::{init_xavier, NetworkConfig};

    fn tiny() -> NetworkState {
        init_xavier(&NetworkConfig::with_hidden(1, 3), 0).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = tiny();
        let before = s.clone();
        let mut g = Gradients::zeros_like(&s);
        adam_step(&mut s, &g, 1e-3);
        assert_eq!(s.weights, before.weights);
        assert_eq!(s.biases, before.biases);
        assert_eq!(s.adam.t, 1);

        // moments decay under a zero gradient after a nonzero one
        g.weights[0].fill(1.0);
        adam_step(&mut s, &g, 1e-3);
        let m = s.adam.m_w[0][[0, 0]];
        let zero = Gradients::zeros_like(&s);
        adam_step(&mut s, &zero, 1e-3);
        assert_eq!(s.adam.m_w[0][[0, 0]], ADAM_BETA1 * m);
    }

    #[test]
    fn constant_gradient_moves_by_learning_rate() {
        for g0 in [1e-6, 1.0, 1e4] {
            let mut s = tiny();
            let mut g = Gradients::zeros_like(&s);
            g.biases[1][0] = g0;
            let lr = 1e-3;
            for _ in 0..50 {
                let before = s.biases[1][0];
                adam_step(&mut s, &g, lr);
                let step = before - s.biases[1][0];
                assert!((step / lr - 1.0).abs() < 1e-2 + ADAM_EPS / g0, "g={g0}: {step}");
            }
        }
    }
}
