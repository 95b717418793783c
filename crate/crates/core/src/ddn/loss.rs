use ndarray::{s, Array1, Array2, Axis, Zip};

use super::network::{forward, gradient_pass, input_gradient, ForwardTrace, Mode};
use super::{Activation, Gradients, NetworkState, Penalty};
use crate::dataset::NormalizedSample;
use crate::{Error, Result};

/// Normalised features with price and scaled sensitivity labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Array2<f64>,
    pub price: Array1<f64>,
    /// `batch × 5`
    pub grad: Array2<f64>,
}

impl Batch {
    pub fn from_samples(samples: &[NormalizedSample]) -> Self {
        let n = samples.len();
        Self {
            x: Array2::from_shape_fn((n, 9), |(i, j)| samples[i].features[j]),
            price: samples.iter().map(|s| s.price).collect(),
            grad: Array2::from_shape_fn((n, 5), |(i, j)| samples[i].grad[j]),
        }
    }

    pub fn len(&self) -> usize {
        self.price.len()
    }

    pub fn is_empty(&self) -> bool {
        self.price.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Batch {
        Batch {
            x: self.x.select(Axis(0), idx),
            price: self.price.select(Axis(0), idx),
            grad: self.grad.select(Axis(0), idx),
        }
    }
}

/// `total = price_term + λ_d · derivative_term + penalty_term`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    /// Mean squared price error.
    pub price_term: f64,
    /// Mean squared error of the differentiation layer, averaged over the
    /// five sensitivities. Zero when the weight is zero, since the layer is
    /// then never built.
    pub derivative_term: f64,
    pub penalty_term: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// The loss without the penalty term.
    pub fn data_total(&self) -> f64 {
        self.total - self.penalty_term
    }
}

pub(crate) fn penalty_value(state: &NetworkState) -> f64 {
    let eta = state.config.reg_coefficient;
    if eta == 0.0 {
        return 0.0;
    }
    let sq = state.squared_norm();
    match state.config.penalty {
        Penalty::L2sq => eta * sq,
        Penalty::L2 => eta * sq.sqrt(),
    }
}

pub(crate) fn breakdown(state: &NetworkState, price_term: f64, derivative_term: f64) -> LossBreakdown {
    let penalty_term = penalty_value(state);
    let lambda = state.config.deriv_loss_weight;
    let weighted = if lambda > 0.0 { lambda * derivative_term } else { 0.0 };
    LossBreakdown {
        price_term,
        derivative_term,
        penalty_term,
        total: price_term + weighted + penalty_term,
    }
}

fn price_mse(pred: &Array1<f64>, price: &Array1<f64>) -> f64 {
    pred.iter().zip(price).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / price.len() as f64
}

fn deriv_mse(g: &Array2<f64>, labels: &Array2<f64>) -> f64 {
    let d = &g.slice(s![.., ..5]) - labels;
    d.iter().map(|v| v * v).sum::<f64>() / (labels.len()) as f64
}

/// Loss of one batch. The differentiation layer is only built when the
/// derivative weight is positive.
pub fn loss(state: &NetworkState, batch: &Batch, mode: Mode) -> Result<LossBreakdown> {
    check_batch(batch)?;
    let (pred, trace) = forward(state, batch.x.view(), mode)?;
    let l2 = if state.config.is_differential() {
        deriv_mse(&input_gradient(state, &trace)?, &batch.grad)
    } else {
        0.0
    };
    Ok(breakdown(state, price_mse(&pred, &batch.price), l2))
}

/// Loss and its gradient with respect to every weight and bias.
///
/// The derivative term depends on `Ξ` through the input gradient, so its
/// contribution is obtained by reverse-differentiating the gradient pass
/// itself, which brings in `ψ''`.
pub fn param_gradients(state: &NetworkState, batch: &Batch, mode: Mode) -> Result<(LossBreakdown, Gradients)> {
    check_batch(batch)?;
    let cfg = &state.config;
    let n_layers = cfg.n_layers();
    let (pred, trace) = forward(state, batch.x.view(), mode)?;
    let b = batch.len() as f64;

    let mut grads = Gradients::zeros_like(state);
    let mut prebar: Vec<Array2<f64>> = trace.pre.iter().map(|p| Array2::zeros(p.raw_dim())).collect();

    let mut l2 = 0.0;
    if cfg.is_differential() {
        l2 = differentiation_adjoint(state, &trace, &batch.grad, &mut grads, &mut prebar)?;
    }

    let l1 = price_mse(&pred, &batch.price);
    {
        let last = &trace.pre[n_layers - 1];
        let mut col = prebar[n_layers - 1].column_mut(0);
        for i in 0..batch.len() {
            let slope = cfg.output_activation.first(cfg.beta, last[[i, 0]]);
            col[i] += 2.0 * (pred[i] - batch.price[i]) / b * slope;
        }
    }

    for l in (0..n_layers).rev() {
        let (head, tail) = prebar.split_at_mut(l);
        let pb = &tail[0];
        grads.weights[l] += &pb.t().dot(trace.layer_input(l));
        grads.biases[l] += &pb.sum_axis(Axis(0));
        if l > 0 {
            let mut ybar = pb.dot(&state.weights[l]);
            if let Some(m) = trace.mask(l - 1) {
                ybar *= m;
            }
            Zip::from(&mut head[l - 1])
                .and(&ybar)
                .and(&trace.pre[l - 1])
                .for_each(|acc, &yb, &x| *acc += yb * cfg.activation.first(cfg.beta, x));
        }
    }

    add_penalty_gradient(state, &mut grads);
    for (l, (w, bias)) in grads.weights.iter().zip(&grads.biases).enumerate() {
        if !w.iter().chain(bias.iter()).all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite parameter gradient in layer {l}")));
        }
    }
    Ok((breakdown(state, l1, l2), grads))
}

/// Adjoint of the derivative term through the gradient pass. Adds the
/// direct weight contributions to `grads` and the pre-activation adjoints
/// to `prebar`; returns the derivative term.
fn differentiation_adjoint(
    state: &NetworkState,
    trace: &ForwardTrace,
    labels: &Array2<f64>,
    grads: &mut Gradients,
    prebar: &mut [Array2<f64>],
) -> Result<f64> {
    let cfg = &state.config;
    let n_layers = cfg.n_layers();
    let pass = gradient_pass(state, trace)?;
    let g = &pass.hy[0];
    let (batch, _) = g.dim();
    let weight = cfg.deriv_loss_weight * 2.0 / (batch as f64 * 5.0);

    let mut l2 = 0.0;
    // adjoint of hy[l], starting from the input gradient
    let mut hbar = Array2::<f64>::zeros(g.raw_dim());
    for i in 0..batch {
        for j in 0..5 {
            let d = g[[i, j]] - labels[[i, j]];
            l2 += d * d;
            hbar[[i, j]] = weight * d;
        }
    }
    l2 /= batch as f64 * 5.0;

    for l in 0..n_layers {
        // hy[l] = gx[l] W_l
        let mut gxbar = hbar.dot(&state.weights[l].t());
        grads.weights[l] += &pass.gx[l].t().dot(&hbar);
        if l + 1 < n_layers {
            // gx[l] = hy[l+1] ⊙ m_l ⊙ ψ'(x_l)
            if let Some(m) = trace.mask(l) {
                gxbar *= m;
            }
            let mut next = Array2::zeros(gxbar.raw_dim());
            Zip::from(&mut next)
                .and(&mut prebar[l])
                .and(&gxbar)
                .and(&pass.hy[l + 1])
                .and(&trace.pre[l])
                .for_each(|n, pb, &gb, &h, &x| {
                    *n = gb * cfg.activation.first(cfg.beta, x);
                    *pb += gb * h * cfg.activation.second(cfg.beta, x);
                });
            hbar = next;
        } else if cfg.output_activation != Activation::Linear {
            // gx[L-1] = ψ_out'(x_{L-1})
            Zip::from(&mut prebar[l])
                .and(&gxbar)
                .and(&trace.pre[l])
                .for_each(|pb, &gb, &x| *pb += gb * cfg.output_activation.second(cfg.beta, x));
        }
    }
    Ok(l2)
}

fn add_penalty_gradient(state: &NetworkState, grads: &mut Gradients) {
    let eta = state.config.reg_coefficient;
    if eta == 0.0 {
        return;
    }
    let factor = match state.config.penalty {
        Penalty::L2sq => 2.0 * eta,
        Penalty::L2 => {
            let norm = state.squared_norm().sqrt();
            if norm == 0.0 {
                return;
            }
            eta / norm
        }
    };
    for (g, w) in grads.weights.iter_mut().zip(&state.weights) {
        g.scaled_add(factor, w);
    }
    for (g, b) in grads.biases.iter_mut().zip(&state.biases) {
        g.scaled_add(factor, b);
    }
}

fn check_batch(batch: &Batch) -> Result<()> {
    let n = batch.len();
    if n == 0 || batch.x.nrows() != n || batch.grad.dim() != (n, 5) {
        return Err(Error::InvalidInput("batch is empty or its arrays disagree in length".into()));
    }
    Ok(())
}
