use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NelderMeadOptions {
    /// Stop when every vertex lies within this max-norm distance of the best.
    pub x_tol: f64,
    /// Stop when every vertex value lies within `f_tol · |f_best|` of the
    /// best value.
    pub f_tol: f64,
    pub max_iter: usize,
    /// Relative size of the initial simplex along each axis.
    pub initial_rel: f64,
    /// Initial step for coordinates that are exactly zero.
    pub initial_abs: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            x_tol: 1e-8,
            f_tol: 1e-10,
            max_iter: 5000,
            initial_rel: 0.05,
            initial_abs: 0.00025,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    SimplexSize,
    ValueSpread,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Best vertex value after each iteration.
    pub best_history: Vec<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Downhill simplex minimisation. Non-finite function values are treated
/// as `+inf`, so failed evaluations are simply never accepted.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut sim: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    sim.push(x0.to_vec());
    for k in 0..n {
        let mut y = x0.to_vec();
        y[k] = if y[k] != 0.0 { (1.0 + opts.initial_rel) * y[k] } else { opts.initial_abs };
        sim.push(y);
    }
    let mut fsim: Vec<f64> = sim.iter().map(|x| eval(x)).collect();
    sort_simplex(&mut sim, &mut fsim);

    let combine = |a: &[f64], wa: f64, b: &[f64], wb: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect()
    };

    let mut iterations = 0;
    let mut best_history = Vec::new();
    let termination = loop {
        let size = sim[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&sim[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let spread = fsim[1..].iter().map(|v| (v - fsim[0]).abs()).fold(0.0, f64::max);
        if size < opts.x_tol {
            break Termination::SimplexSize;
        }
        let tol = opts.f_tol * fsim[0].abs();
        if spread <= tol {
            // a simplex straddling the minimum symmetrically also has equal
            // vertex values; the centroid tells the two cases apart
            let centre = centroid(&sim[..=n]);
            if (eval(&centre) - fsim[0]).abs() <= tol {
                break Termination::ValueSpread;
            }
        }
        if iterations >= opts.max_iter {
            break Termination::MaxIterations;
        }

        let xbar = centroid(&sim[..n]);
        let worst = sim[n].clone();
        let xr = combine(&xbar, 1.0 + REFLECT, &worst, -REFLECT);
        let fr = eval(&xr);
        let mut shrink = false;
        if fr < fsim[0] {
            let xe = combine(&xbar, 1.0 + REFLECT * EXPAND, &worst, -REFLECT * EXPAND);
            let fe = eval(&xe);
            if fe < fr {
                (sim[n], fsim[n]) = (xe, fe);
            } else {
                (sim[n], fsim[n]) = (xr, fr);
            }
        } else if fr < fsim[n - 1] {
            (sim[n], fsim[n]) = (xr, fr);
        } else if fr < fsim[n] {
            let xc = combine(&xbar, 1.0 + CONTRACT * REFLECT, &worst, -CONTRACT * REFLECT);
            let fc = eval(&xc);
            if fc <= fr {
                (sim[n], fsim[n]) = (xc, fc);
            } else {
                shrink = true;
            }
        } else {
            let xcc = combine(&xbar, 1.0 - CONTRACT, &worst, CONTRACT);
            let fcc = eval(&xcc);
            if fcc < fsim[n] {
                (sim[n], fsim[n]) = (xcc, fcc);
            } else {
                shrink = true;
            }
        }
        if shrink {
            for j in 1..=n {
                sim[j] = combine(&sim[0], 1.0 - SHRINK, &sim[j], SHRINK);
                fsim[j] = eval(&sim[j]);
            }
        }
        sort_simplex(&mut sim, &mut fsim);
        iterations += 1;
        best_history.push(fsim[0]);
    };

    NelderMeadResult {
        x: sim.swap_remove(0),
        f: fsim[0],
        iterations,
        evaluations,
        termination,
        best_history,
    }
}

fn centroid(points: &[Vec<f64>]) -> Vec<f64> {
    let mut c = vec![0.0; points[0].len()];
    for v in points {
        for (c, x) in c.iter_mut().zip(v) {
            *c += x / points.len() as f64;
        }
    }
    c
}

/// Stable sort by value so ties keep their vertex order.
fn sort_simplex(sim: &mut Vec<Vec<f64>>, fsim: &mut Vec<f64>) {
    let mut idx: Vec<usize> = (0..fsim.len()).collect();
    idx.sort_by(|&a, &b| fsim[a].total_cmp(&fsim[b]));
    *sim = idx.iter().map(|&i| std::mem::take(&mut sim[i])).collect();
    *fsim = idx.iter().map(|&i| fsim[i]).collect();
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn convex_quadratic() {
        let r = nelder_mead(|x| x.iter().map(|v| (v - 1.0).powi(2)).sum(), &[0.0; 5], &NelderMeadOptions::default());
        assert!(r.x.iter().all(|v| (v - 1.0).abs() < 1e-6), "{:?}", r);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let r = nelder_mead(f, &[-1.2, 1.0], &NelderMeadOptions::default());
        assert!(r.f < 1e-8, "{r:?}");
    }

    #[test]
    fn constant_stops_at_once() {
        let r = nelder_mead(|_| 3.0, &[1.0, 2.0, 0.0], &NelderMeadOptions::default());
        assert_eq!(r.iterations, 0);
        assert_eq!(r.termination, Termination::ValueSpread);
        assert_eq!(r.evaluations, 5);
    }

    #[test]
    fn failed_evaluations_are_avoided() {
        let f = |x: &[f64]| if x[0] < 0.5 { f64::NAN } else { (x[0] - 2.0).powi(2) };
        let r = nelder_mead(f, &[1.0], &NelderMeadOptions::default());
        assert!((r.x[0] - 2.0).abs() < 1e-6, "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn best_value_never_increases(
            x0 in prop::collection::vec(-3.0f64..3.0, 2..5),
            c in prop::collection::vec(-2.0f64..2.0, 5),
        ) {
            let f = |x: &[f64]| x.iter().zip(&c).map(|(a, b)| (a - b).powi(2) + 0.3 * (3.0 * a).sin()).sum::<f64>();
            let r = nelder_mead(f, &x0, &NelderMeadOptions { max_iter: 400, ..Default::default() });
            for w in r.best_history.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }
    }
}
