use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use super::NetworkState;
use crate::{Error, Result};

/// Evaluation mode, or training mode with the dropout masks for this batch
/// (one `batch × N_l` array per hidden layer).
#[derive(Debug, Clone)]
pub enum Mode {
    Eval,
    Train(Vec<Array2<f64>>),
}

/// Everything the reverse passes need from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub inputs: Array2<f64>,
    /// Pre-activations `x_l` of every layer, output included.
    pub pre: Vec<Array2<f64>>,
    /// Hidden activations `y_l` after dropout.
    pub post: Vec<Array2<f64>>,
    pub masks: Option<Vec<Array2<f64>>>,
}

impl ForwardTrace {
    /// Activation feeding layer `l`.
    pub(crate) fn layer_input(&self, l: usize) -> &Array2<f64> {
        if l == 0 {
            &self.inputs
        } else {
            &self.post[l - 1]
        }
    }

    pub(crate) fn mask(&self, l: usize) -> Option<&Array2<f64>> {
        self.masks.as_ref().map(|m| &m[l])
    }
}

fn check_finite(a: &Array2<f64>, what: &str, layer: usize) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("non-finite {what} in layer {layer}")))
    }
}

/// Runs a batch (rows are samples, nine normalised features each) through
/// the network. Returns the predictions in normalised price units.
pub fn forward(state: &NetworkState, x: ArrayView2<f64>, mode: Mode) -> Result<(Array1<f64>, ForwardTrace)> {
    let cfg = &state.config;
    let n_layers = cfg.n_layers();
    let batch = x.nrows();
    if x.ncols() != cfg.layer_sizes[0] {
        return Err(Error::InvalidInput(format!(
            "expected {} input features, got {}",
            cfg.layer_sizes[0],
            x.ncols()
        )));
    }
    let masks = match mode {
        Mode::Eval => None,
        Mode::Train(m) => {
            let ok = m.len() == n_layers - 1
                && m.iter().zip(&cfg.layer_sizes[1..]).all(|(a, &n)| a.dim() == (batch, n));
            if !ok {
                return Err(Error::InvalidInput("dropout masks do not match the batch".into()));
            }
            Some(m)
        }
    };

    let mut trace = ForwardTrace {
        inputs: x.to_owned(),
        pre: Vec::with_capacity(n_layers),
        post: Vec::with_capacity(n_layers - 1),
        masks,
    };
    for l in 0..n_layers {
        let mut pre = trace.layer_input(l).dot(&state.weights[l].t());
        pre += &state.biases[l];
        check_finite(&pre, "pre-activation", l)?;
        if l + 1 < n_layers {
            let mut y = pre.mapv(|v| cfg.activation.value(cfg.beta, v));
            if let Some(m) = trace.mask(l) {
                y *= m;
            }
            check_finite(&y, "activation", l)?;
            trace.post.push(y);
        }
        trace.pre.push(pre);
    }
    let out = trace.pre[n_layers - 1]
        .column(0)
        .mapv(|v| cfg.output_activation.value(cfg.beta, v));
    check_finite(&out.clone().insert_axis(Axis(1)), "output", n_layers - 1)?;
    Ok((out, trace))
}

/// Reverse sweep of the network output with respect to every layer.
///
/// `gx[l]` is `∂out/∂x_l` and `hy[l]` is `∂out/∂y_{l-1}`, so `hy[0]` is the
/// gradient with respect to the inputs.
pub(crate) struct GradientPass {
    pub gx: Vec<Array2<f64>>,
    pub hy: Vec<Array2<f64>>,
}

pub(crate) fn gradient_pass(state: &NetworkState, trace: &ForwardTrace) -> Result<GradientPass> {
    let cfg = &state.config;
    let n_layers = cfg.n_layers();
    let mut gx = vec![Array2::zeros((0, 0)); n_layers];
    let mut hy = vec![Array2::zeros((0, 0)); n_layers];
    gx[n_layers - 1] = trace.pre[n_layers - 1].mapv(|v| cfg.output_activation.first(cfg.beta, v));
    for l in (0..n_layers).rev() {
        let h = gx[l].dot(&state.weights[l]);
        check_finite(&h, "input gradient", l)?;
        if l > 0 {
            let mut g = Array2::zeros(h.raw_dim());
            Zip::from(&mut g)
                .and(&h)
                .and(&trace.pre[l - 1])
                .for_each(|g, &h, &x| *g = h * cfg.activation.first(cfg.beta, x));
            if let Some(m) = trace.mask(l - 1) {
                g *= m;
            }
            gx[l - 1] = g;
        }
        hy[l] = h;
    }
    Ok(GradientPass { gx, hy })
}

/// `∂out/∂input` for every row of the traced batch, in normalised units.
/// The first five columns form the differentiation layer. Dropout masks
/// recorded in the trace enter the product exactly as in the forward pass.
pub fn input_gradient(state: &NetworkState, trace: &ForwardTrace) -> Result<Array2<f64>> {
    Ok(gradient_pass(state, trace)?.hy.swap_remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddn::{init_xavier, Activation, NetworkConfig};
    use crate::rng::seeded;
    use ndarray::Array;
    use rand::RngExt;

    fn small(hidden: usize, width: usize, seed: u64) -> NetworkState {
        let mut c = NetworkConfig::with_hidden(hidden, width);
        c.dropout_rate = 0.3;
        let mut s = init_xavier(&c, seed).unwrap();
        // nonzero biases so every code path is exercised
        let mut rng = seeded(seed, 99);
        for b in &mut s.biases {
            b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        s
    }

    fn inputs(batch: usize, seed: u64) -> Array2<f64> {
        let mut rng = seeded(seed, 98);
        Array::from_shape_simple_fn((batch, 9), || rng.random_range(0.0..1.0))
    }

    #[test]
    fn zero_network_outputs_bias() {
        let mut s = small(2, 6, 1);
        s.weights.iter_mut().for_each(|w| w.fill(0.0));
        s.biases.iter_mut().for_each(|b| b.fill(0.0));
        let x = inputs(5, 1);
        let (out, trace) = forward(&s, x.view(), Mode::Eval).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
        assert!(input_gradient(&s, &trace).unwrap().iter().all(|&v| v == 0.0));
        s.biases.last_mut().unwrap()[0] = 0.37;
        let (out, _) = forward(&s, x.view(), Mode::Eval).unwrap();
        assert!(out.iter().all(|&v| v == 0.37));
    }

    #[test]
    fn eval_is_deterministic() {
        let s = small(3, 20, 2);
        let x = inputs(16, 2);
        let (a, _) = forward(&s, x.view(), Mode::Eval).unwrap();
        let (b, _) = forward(&s, x.view(), Mode::Eval).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_network_gradient_is_weight_product() {
        let mut s = small(2, 7, 3);
        s.config.activation = Activation::Linear;
        let x = inputs(3, 3);
        let (_, trace) = forward(&s, x.view(), Mode::Eval).unwrap();
        let g = input_gradient(&s, &trace).unwrap();
        let product = s.weights[2].dot(&s.weights[1]).dot(&s.weights[0]);
        for row in g.rows() {
            for (a, b) in row.iter().zip(product.row(0)) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    fn fd_check(s: &NetworkState, x: &Array2<f64>, masks: Option<Vec<Array2<f64>>>) {
        let mode = || masks.clone().map(Mode::Train).unwrap_or(Mode::Eval);
        let (_, trace) = forward(s, x.view(), mode()).unwrap();
        let g = input_gradient(s, &trace).unwrap();
        let h = 1e-5;
        for j in 0..9 {
            let mut up = x.clone();
            let mut dn = x.clone();
            up.column_mut(j).mapv_inplace(|v| v + h);
            dn.column_mut(j).mapv_inplace(|v| v - h);
            let (fu, _) = forward(s, up.view(), mode()).unwrap();
            let (fd, _) = forward(s, dn.view(), mode()).unwrap();
            for b in 0..x.nrows() {
                let num = (fu[b] - fd[b]) / (2.0 * h);
                let rel = (g[[b, j]] - num).abs() / num.abs().max(g[[b, j]].abs()).max(1e-5);
                assert!(rel < 1e-6, "row {b} col {j}: {} vs {num}", g[[b, j]]);
            }
        }
    }

    #[test]
    fn input_gradient_matches_differences() {
        for seed in 0..5 {
            let s = small(3, 12, seed);
            fd_check(&s, &inputs(4, seed), None);
        }
    }

    #[test]
    fn input_gradient_uses_the_same_masks() {
        let s = small(3, 12, 4);
        let masks = s.draw_masks(4, &mut seeded(4, 97));
        fd_check(&s, &inputs(4, 4), Some(masks));
    }

    #[test]
    fn rejects_wrong_width() {
        let s = small(1, 4, 0);
        let x = Array2::zeros((2, 8));
        assert!(forward(&s, x.view(), Mode::Eval).is_err());
    }
}
