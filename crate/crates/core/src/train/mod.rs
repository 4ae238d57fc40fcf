//! Training loop, learning-rate schedule and top-k evaluation.

mod config;

pub use config::{RunConfig, TrainConfig};

use std::io::Write;

use ndarray::Array4;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{augment, fit_length, fit_persons, stack_batch, SkeletonSequence};
use crate::error::{Error, Result};
use crate::layers::{Mode, Module};
use crate::model::PrGcnModel;
use crate::numerics::{no_grad, sgd_step, Float, Tensor};

const EVAL_BATCH: usize = 32;

/// Step schedule: `base_lr · decay_factor^⌊epoch / decay_period⌋`, held at
/// `base_lr` for the first `warm_period` epochs.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    if epoch < cfg.warm_period {
        return cfg.base_lr;
    }
    let steps = (epoch / cfg.decay_period) as i32;
    cfg.base_lr * cfg.decay_factor.powi(steps)
}

/// Metrics of one training epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub top1: f64,
    pub top5: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Metrics {
    pub top1: f64,
    pub top5: f64,
    /// Mean cross-entropy.
    pub loss: f64,
    pub history: Vec<EpochRecord>,
}

/// Position of `label` when classes are ordered by descending probability,
/// ties going to the smaller class index.
pub fn label_rank<F: Float>(probs: &[F], label: usize) -> usize {
    let p = probs[label];
    probs
        .iter()
        .enumerate()
        .filter(|&(c, &q)| q > p || (q == p && c < label))
        .count()
}

/// Fraction of rows of a row-major `(B, K)` table whose label ranks within
/// the top `k`. `k` larger than `K` behaves as `K`.
pub fn topk_accuracy<F: Float>(probs: &[F], num_classes: usize, labels: &[usize], k: usize) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = labels
        .iter()
        .enumerate()
        .filter(|&(i, &l)| label_rank(&probs[i * num_classes..(i + 1) * num_classes], l) < k)
        .count();
    hits as f64 / labels.len() as f64
}

fn check_dataset<F: Float>(model: &PrGcnModel<F>, data: &[SkeletonSequence]) -> Result<Vec<usize>> {
    if data.is_empty() {
        return Err(Error::Data("dataset is empty".into()));
    }
    let k = model.config().num_classes;
    let n = model.num_joints();
    data.iter()
        .map(|clip| {
            if clip.joints() != n {
                return Err(Error::Data(format!(
                    "clip `{}` has {} joints, model expects {n}",
                    clip.id,
                    clip.joints()
                )));
            }
            if clip.semantics != model.config().semantics {
                return Err(Error::Data(format!(
                    "clip `{}` holds {} data, model expects {}",
                    clip.id,
                    clip.semantics.name(),
                    model.config().semantics.name()
                )));
            }
            let label = clip.label_or_err()?;
            if label >= k {
                return Err(Error::Label { label, num_classes: k });
            }
            Ok(label)
        })
        .collect()
}

/// Fits one clip to the model's person count and frame count.
pub fn prepare_clip(
    clip: &SkeletonSequence,
    persons: usize,
    frames: usize,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> Array4<f32> {
    fit_length(&fit_persons(&clip.coords, persons), frames, mode, rng)
}

/// Trains for `cfg.epochs` epochs of shuffled mini-batches and returns the
/// per-epoch history. The last record's values are copied to the top-level
/// fields. One JSON line per epoch goes to `log`, if given.
///
/// Runs are deterministic given `cfg.seed` and the model's initial state.
pub fn train<F: Float>(
    model: &mut PrGcnModel<F>,
    data: &[SkeletonSequence],
    cfg: &TrainConfig,
    log: Option<&mut dyn Write>,
) -> Result<Metrics> {
    train_until(model, data, cfg, log, |_, _| Ok(false))
}

/// [`train`], calling `stop(epoch_record, model)` after every epoch and
/// finishing early once it returns `true`.
pub fn train_until<F: Float>(
    model: &mut PrGcnModel<F>,
    data: &[SkeletonSequence],
    cfg: &TrainConfig,
    mut log: Option<&mut dyn Write>,
    mut stop: impl FnMut(&EpochRecord, &PrGcnModel<F>) -> Result<bool>,
) -> Result<Metrics> {
    cfg.validate()?;
    let labels = check_dataset(model, data)?;
    let (persons, frames, k) = {
        let c = model.config();
        (c.persons, c.frames, c.num_classes)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut metrics = Metrics::default();

    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, cfg);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut hits1, mut hits5) = (0.0, 0.0, 0.0);
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let clips: Vec<Array4<f32>> = chunk
                .iter()
                .map(|&i| {
                    let x = prepare_clip(&data[i], persons, frames, Mode::Train, &mut rng);
                    augment(&x, data[i].semantics, &cfg.augment, &mut rng)
                })
                .collect();
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let x: Tensor<F> = stack_batch(&clips)?;

            let probs = model.forward(&x, Mode::Train)?;
            let loss = probs.cross_entropy(&batch_labels)?;
            let loss_value = loss.item()?.to_f64();
            if !loss_value.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: batch_idx,
                    lr,
                });
            }
            loss.backward()?;
            let mut params = model.parameters_mut();
            sgd_step(&mut params, F::of(lr), F::of(cfg.momentum))?;
            params.iter().for_each(|p| p.zero_grad());

            let b = chunk.len() as f64;
            loss_sum += loss_value * b;
            hits1 += topk_accuracy(probs.data(), k, &batch_labels, 1) * b;
            hits5 += topk_accuracy(probs.data(), k, &batch_labels, 5) * b;
        }
        let n = data.len() as f64;
        let record = EpochRecord {
            epoch,
            lr,
            loss: loss_sum / n,
            top1: hits1 / n,
            top5: hits5 / n,
        };
        if let Some(w) = log.as_mut() {
            writeln!(w, "{}", serde_json::to_string(&record)?)?;
        }
        let done = stop(&record, model)?;
        metrics.history.push(record);
        if done {
            break;
        }
    }
    if let Some(last) = metrics.history.last() {
        metrics.top1 = last.top1;
        metrics.top5 = last.top5;
        metrics.loss = last.loss;
    }
    Ok(metrics)
}

/// Class probabilities `(len, K)` for `data` in inference mode, with
/// centered windows and no augmentation.
pub fn predict<F: Float>(model: &PrGcnModel<F>, data: &[SkeletonSequence]) -> Result<Vec<F>> {
    let (persons, frames) = (model.config().persons, model.config().frames);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut out = Vec::new();
    no_grad(|| {
        for chunk in data.chunks(EVAL_BATCH) {
            let clips: Vec<Array4<f32>> = chunk
                .iter()
                .map(|c| prepare_clip(c, persons, frames, Mode::Eval, &mut rng))
                .collect();
            let x: Tensor<F> = stack_batch(&clips)?;
            out.extend_from_slice(model.forward(&x, Mode::Eval)?.data());
        }
        Ok(out)
    })
}

/// Top-1, top-5 and mean cross-entropy over a labelled dataset.
pub fn evaluate<F: Float>(model: &PrGcnModel<F>, data: &[SkeletonSequence]) -> Result<Metrics> {
    let labels = check_dataset(model, data)?;
    let k = model.config().num_classes;
    let probs = predict(model, data)?;
    let loss = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let p = probs[i * k + l].to_f64();
            -(if p < 1e-12 { 1e-12 } else { p }).ln()
        })
        .sum::<f64>()
        / labels.len() as f64;
    Ok(Metrics {
        top1: topk_accuracy(&probs, k, &labels, 1),
        top5: topk_accuracy(&probs, k, &labels, 5),
        loss,
        history: Vec::new(),
    })
}
