#![allow(dead_code)]

use heston_ddn::heston::{HestonParams, PricingInput};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Discounted call and put estimates with their standard errors.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub call: f64,
    pub call_se: f64,
    pub put: f64,
    pub put_se: f64,
}

const CHUNK: usize = 1 << 12;

/// Full-truncation Euler scheme: the variance process is simulated with
/// `max(v, 0)` in both drift and diffusion, the log price with the same
/// truncated variance. Paths are split into fixed-size chunks, each with its
/// own ChaCha stream, so the estimate does not depend on the thread count.
pub fn monte_carlo(input: &PricingInput, paths: usize, steps: usize, seed: u64) -> McEstimate {
    let HestonParams {
        kappa,
        lambda,
        sigma,
        rho,
        v0,
    } = input.heston;
    let dt = input.tau / steps as f64;
    let sdt = dt.sqrt();
    let rho_c = (1.0 - rho * rho).sqrt();
    let disc = (-input.r * input.tau).exp();
    let n_chunks = paths.div_ceil(CHUNK);

    let sums = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(paths - c * CHUNK);
            let mut acc = [0.0f64; 4];
            for _ in 0..n {
                let mut x = input.s0.ln();
                let mut v = v0;
                for _ in 0..steps {
                    let z1: f64 = rng.sample(StandardNormal);
                    let z2: f64 = rng.sample(StandardNormal);
                    let vp = v.max(0.0);
                    let sv = vp.sqrt() * sdt;
                    x += (input.r - 0.5 * vp) * dt + sv * z1;
                    v += kappa * (lambda - vp) * dt + sigma * sv * (rho * z1 + rho_c * z2);
                }
                let st = x.exp();
                let call = disc * (st - input.k).max(0.0);
                let put = disc * (input.k - st).max(0.0);
                acc[0] += call;
                acc[1] += call * call;
                acc[2] += put;
                acc[3] += put * put;
            }
            acc
        })
        .collect::<Vec<_>>();

    let mut tot = [0.0f64; 4];
    for s in &sums {
        for i in 0..4 {
            tot[i] += s[i];
        }
    }
    let n = paths as f64;
    let stats = |s: f64, s2: f64| {
        let mean = s / n;
        let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
        (mean, (var / n).sqrt())
    };
    let (call, call_se) = stats(tot[0], tot[1]);
    let (put, put_se) = stats(tot[2], tot[3]);
    McEstimate {
        call,
        call_se,
        put,
        put_se,
    }
}

/// Call price from the single-integral representation
/// `C = S0 - sqrt(S0 K) e^{-r tau / 2} / pi * int_0^inf Re[e^{iu x} phi(u - i/2)] / (u^2 + 1/4) du`
/// with `x = log(S0 / K) + r tau` and `phi` the characteristic function of
/// the log return, integrated by composite Simpson on a long, fine grid.
/// The characteristic function is coded here from scratch rather than
/// taken from the library.
pub fn single_integral_call(input: &PricingInput, u_max: f64, n: usize) -> f64 {
    use num_complex::Complex64 as C;
    let HestonParams {
        kappa,
        lambda,
        sigma,
        rho,
        v0,
    } = input.heston;
    let tau = input.tau;
    let x = (input.s0 / input.k).ln() + input.r * tau;
    // log-return characteristic function without drift, Albrecher et al. form
    let cf = |w: C| -> C {
        let i = C::i();
        let beta = kappa - rho * sigma * i * w;
        let d = (beta * beta + sigma * sigma * (w * w + i * w)).sqrt();
        let g = (beta - d) / (beta + d);
        let e = (-d * tau).exp();
        let a = kappa * lambda / (sigma * sigma) * ((beta - d) * tau - 2.0 * ((1.0 - g * e) / (1.0 - g)).ln());
        let b = (beta - d) / (sigma * sigma) * (1.0 - e) / (1.0 - g * e);
        (a + b * v0).exp()
    };
    let f = |u: f64| -> f64 {
        let w = C::new(u, -0.5);
        let val = (C::i() * u * x).exp() * cf(w);
        val.re / (u * u + 0.25)
    };
    let n = n + n % 2;
    let h = u_max / n as f64;
    let mut s = f(0.0) + f(u_max);
    for j in 1..n {
        s += f(j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
    }
    let integral = s * h / 3.0;
    input.s0 - (input.s0 * input.k).sqrt() * (-0.5 * input.r * tau).exp() / std::f64::consts::PI * integral
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub mod nets {
    use heston_ddn::ddn::{forward, input_gradient, init_xavier, loss, param_gradients, Batch, Mode, NetworkConfig, NetworkState};
    use ndarray::{Array, Array2};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Relative error with a floor on the denominator, so that entries that
    /// are zero up to rounding are compared absolutely.
    pub fn rel(a: f64, b: f64, floor: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(floor)
    }

    /// A Xavier network with random biases.
    pub fn random_network(hidden: usize, width: usize, seed: u64, tweak: impl FnOnce(&mut NetworkConfig)) -> NetworkState {
        let mut c = NetworkConfig::with_hidden(hidden, width);
        tweak(&mut c);
        let mut s = init_xavier(&c, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for b in &mut s.biases {
            b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        s
    }

    pub fn random_batch(n: usize, seed: u64) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xba7c);
        Batch {
            x: Array::from_shape_simple_fn((n, 9), || rng.random_range(0.0..1.0)),
            price: Array::from_shape_simple_fn(n, || rng.random_range(0.0..1.0)),
            grad: Array::from_shape_simple_fn((n, 5), || rng.random_range(-1.0..1.0)),
        }
    }

    /// Largest relative error between the differentiation layer and a
    /// Richardson-extrapolated central difference of the network output.
    pub fn input_gradient_error(s: &NetworkState, x: &Array2<f64>) -> f64 {
        let (_, trace) = forward(s, x.view(), Mode::Eval).unwrap();
        let g = input_gradient(s, &trace).unwrap();
        let out = |x: &Array2<f64>| forward(s, x.view(), Mode::Eval).unwrap().0;
        let diff = |j: usize, h: f64| {
            let mut up = x.clone();
            let mut dn = x.clone();
            up.column_mut(j).mapv_inplace(|v| v + h);
            dn.column_mut(j).mapv_inplace(|v| v - h);
            (out(&up) - out(&dn)) / (2.0 * h)
        };
        let mut worst: f64 = 0.0;
        for j in 0..x.ncols() {
            let h = 1e-3;
            let rich = (4.0 * diff(j, h / 2.0) - diff(j, h)) / 3.0;
            for (i, &n) in rich.iter().enumerate() {
                worst = worst.max(rel(g[[i, j]], n, 1e-8));
            }
        }
        worst
    }

    /// Largest relative error between the analytic loss gradient and a
    /// central difference of the total loss, over every weight and bias.
    pub fn param_gradient_error(s: &NetworkState, b: &Batch, masks: Option<Vec<Array2<f64>>>) -> f64 {
        let mode = || masks.clone().map(Mode::Train).unwrap_or(Mode::Eval);
        let (_, g) = param_gradients(s, b, mode()).unwrap();
        let f = |t: &NetworkState| loss(t, b, mode()).unwrap().total;
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for l in 0..s.weights.len() {
            for ((i, j), &a) in g.weights[l].indexed_iter() {
                let mut up = s.clone();
                let mut dn = s.clone();
                up.weights[l][[i, j]] += h;
                dn.weights[l][[i, j]] -= h;
                worst = worst.max(rel(a, (f(&up) - f(&dn)) / (2.0 * h), 1e-5));
            }
            for (i, &a) in g.biases[l].indexed_iter() {
                let mut up = s.clone();
                let mut dn = s.clone();
                up.biases[l][i] += h;
                dn.biases[l][i] -= h;
                worst = worst.max(rel(a, (f(&up) - f(&dn)) / (2.0 * h), 1e-5));
            }
        }
        worst
    }
}
