use log::info;
use rand::seq::SliceRandom;

use super::loss::{breakdown, param_gradients, Batch, LossBreakdown};
use super::network::{forward, input_gradient, Mode};
use super::{adam_step, init_xavier, NetworkConfig, NetworkState};
use crate::dataset::{fit_scalers, normalize, DatasetSplit, LabeledSample, Scalers};
use crate::rng::{seeded, stream};
use crate::{Error, Result};

const EVAL_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// One-based.
    pub epoch: usize,
    /// Running means over the epoch's batches.
    pub train: LossBreakdown,
    pub validation: LossBreakdown,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights of the epoch with the lowest validation loss.
    pub state: NetworkState,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

fn normalized_batch(samples: &[LabeledSample], idx: &[usize], scalers: &Scalers) -> Batch {
    let rows: Vec<_> = idx.iter().map(|&i| normalize(&samples[i], scalers)).collect();
    Batch::from_samples(&rows)
}

/// Trains from Xavier initialisation on the training partition, selecting
/// the checkpoint by validation loss. Scalers are fitted on the training
/// rows and stored in the returned state.
pub fn train(samples: &[LabeledSample], split: &DatasetSplit, config: &NetworkConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if split.train.is_empty() {
        return Err(Error::InvalidInput("training partition is empty".into()));
    }
    let scalers = fit_scalers(samples, split)?;
    let train_set = normalized_batch(samples, &split.train, &scalers);
    let val_set = normalized_batch(samples, &split.validation, &scalers);

    let mut state = init_xavier(config, config.seed)?;
    state.scalers = Some(scalers);
    let mut shuffle_rng = seeded(config.seed, stream::SHUFFLE);
    let mut dropout_rng = seeded(config.seed, stream::DROPOUT);

    let n = train_set.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, NetworkState, usize)> = None;

    for epoch in 0..config.epochs {
        let lr = config.learning_rate(epoch);
        order.shuffle(&mut shuffle_rng);
        let (mut sum_price, mut sum_deriv) = (0.0, 0.0);
        for (k, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = train_set.select(chunk);
            let mode = if config.dropout_rate > 0.0 {
                Mode::Train(state.draw_masks(chunk.len(), &mut dropout_rng))
            } else {
                Mode::Eval
            };
            let diag = |e: Error| Error::Numerical(format!("epoch {} batch {k}: {e}", epoch + 1));
            let (l, grads) = param_gradients(&state, &batch, mode).map_err(diag)?;
            if !l.total.is_finite() {
                return Err(diag(Error::Numerical(format!("loss is {}", l.total))));
            }
            adam_step(&mut state, &grads, lr);
            sum_price += l.price_term * chunk.len() as f64;
            sum_deriv += l.derivative_term * chunk.len() as f64;
        }
        state.epoch = epoch + 1;

        let train = breakdown(&state, sum_price / n as f64, sum_deriv / n as f64);
        let validation = if val_set.is_empty() {
            train
        } else {
            evaluate_batch(&state, &val_set, config.is_differential())?
        };
        info!(
            "epoch {:>4}  lr {lr:.3e}  train {:.4e} (price {:.4e}, deriv {:.4e})  val {:.4e}",
            epoch + 1,
            train.total,
            train.price_term,
            train.derivative_term,
            validation.total
        );
        history.push(EpochRecord {
            epoch: epoch + 1,
            train,
            validation,
            lr,
        });
        if best.as_ref().is_none_or(|(b, _, _)| validation.total < *b) {
            best = Some((validation.total, state.clone(), epoch + 1));
        }
    }

    let (_, state, best_epoch) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        state,
        history,
        best_epoch,
    })
}

/// Eval-mode loss over a normalised set, in chunks. The derivative term is
/// only computed when `with_derivative` is set.
pub(crate) fn evaluate_batch(state: &NetworkState, set: &Batch, with_derivative: bool) -> Result<LossBreakdown> {
    let n = set.len();
    if n == 0 {
        return Err(Error::InvalidInput("cannot evaluate on an empty set".into()));
    }
    let (mut sq_price, mut sq_deriv) = (0.0, 0.0);
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let b = set.select(chunk);
        let (pred, trace) = forward(state, b.x.view(), Mode::Eval)?;
        sq_price += pred.iter().zip(&b.price).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
        if with_derivative {
            let g = input_gradient(state, &trace)?;
            for i in 0..chunk.len() {
                for j in 0..5 {
                    let d = g[[i, j]] - b.grad[[i, j]];
                    sq_deriv += d * d;
                }
            }
        }
    }
    Ok(breakdown(state, sq_price / n as f64, sq_deriv / (5 * n) as f64))
}

/// Normalised eval-mode loss of labelled samples, derivative term included
/// whatever the training weight was.
pub fn evaluate(state: &NetworkState, samples: &[LabeledSample]) -> Result<LossBreakdown> {
    let scalers = state.scalers()?;
    let idx: Vec<usize> = (0..samples.len()).collect();
    evaluate_batch(state, &normalized_batch(samples, &idx, scalers), true)
}
