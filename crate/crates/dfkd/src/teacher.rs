//! Supervised teacher training on real data, including deliberately
//! truncated ("noisy") teachers.

use dfkd_core::divergence::log_softmax_into;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::distill::dataset_logits;
use crate::error::{DfkdError, Result};
use crate::models::Architecture;
use crate::nn::{Adam, AdamConfig, BackwardOpts, Mode, Network, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeacherTraining {
    pub arch: Architecture,
    /// May be fractional; training stops after `round(epochs · batches per epoch)` steps.
    pub epochs: f64,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeacherReport {
    pub steps: usize,
    pub epochs: f64,
    pub test_accuracy: f64,
}

/// Mean softmax cross-entropy against true labels and its logit gradient.
pub fn cross_entropy_grad(logits: &[f64], labels: &[usize], classes: usize) -> (f64, Vec<f64>) {
    let n = labels.len();
    let mut grad = vec![0.0; logits.len()];
    let mut lp = vec![0.0; classes];
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        log_softmax_into(&logits[i * classes..(i + 1) * classes], 1.0, &mut lp);
        total -= lp[y];
        for k in 0..classes {
            let p = lp[k].exp();
            grad[i * classes + k] = (p - if k == y { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    (total / n as f64, grad)
}

pub fn accuracy(net: &mut Network<f32>, data: &Dataset) -> f64 {
    let classes = net.output_dims().size();
    let logits = dataset_logits(net, data);
    let hits = logits
        .chunks(classes)
        .zip(&data.labels)
        .filter(|(row, &y)| dfkd_core::argmax(row) == y)
        .count();
    hits as f64 / data.len().max(1) as f64
}

/// Trains from scratch; `on_step(step, net)` is called after every update.
pub fn train_teacher_with(
    cfg: &TeacherTraining,
    train: &Dataset,
    test: &Dataset,
    mut on_step: impl FnMut(usize, &mut Network<f32>) -> bool,
) -> Result<(Network<f32>, TeacherReport)> {
    if cfg.batch_size == 0 || !(cfg.epochs >= 0.0) {
        return Err(DfkdError::Config("teacher.batch_size must be positive and teacher.epochs non-negative".into()));
    }
    if train.is_empty() {
        return Err(DfkdError::Setup("training split is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let classes = train.id.classes();
    let mut net = Network::<f32>::new(&cfg.arch.layers(train.dims, classes), train.dims, &mut rng)
        .map_err(DfkdError::Config)?;
    let mut opt = Adam::new(cfg.adam, net.num_params());
    let per_epoch = train.len().div_ceil(cfg.batch_size);
    let total = (cfg.epochs * per_epoch as f64).round() as usize;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = 0;
    'outer: while step < total {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            if step >= total {
                break 'outer;
            }
            let (x, y) = train.gather(chunk);
            let logits = net.forward(&x, Mode::Train);
            let (loss, grad) = cross_entropy_grad(&logits.to_f64(), &y, classes);
            if !loss.is_finite() {
                return Err(DfkdError::Diverged { epoch: step / per_epoch, phase: "teacher", step, detail: format!("loss {loss}") });
            }
            net.zero_grads();
            net.backward(Tensor::from_f64(y.len(), classes, 1, 1, &grad), BackwardOpts { param_grads: true, bn_stat_grads: None });
            let (p, g) = net.params_and_grads();
            opt.step(p, g);
            step += 1;
            if !on_step(step, &mut net) {
                break 'outer;
            }
        }
    }
    let report = TeacherReport { steps: step, epochs: step as f64 / per_epoch as f64, test_accuracy: accuracy(&mut net, test) };
    Ok((net, report))
}

pub fn train_teacher(cfg: &TeacherTraining, train: &Dataset, test: &Dataset) -> Result<(Network<f32>, TeacherReport)> {
    train_teacher_with(cfg, train, test, |_, _| true)
}

/// Under-trained teacher: the full recipe stopped after `truncation_epochs`.
pub fn make_noisy_teacher(
    cfg: &TeacherTraining,
    truncation_epochs: f64,
    train: &Dataset,
    test: &Dataset,
) -> Result<(Network<f32>, TeacherReport)> {
    let truncated = TeacherTraining { epochs: truncation_epochs.min(cfg.epochs), ..*cfg };
    train_teacher(&truncated, train, test)
}

/// Under-trained teacher stopped at the first multiple of `check_every` steps
/// whose test accuracy reaches `target`.
pub fn make_noisy_teacher_at_accuracy(
    cfg: &TeacherTraining,
    target: f64,
    check_every: usize,
    train: &Dataset,
    test: &Dataset,
) -> Result<(Network<f32>, TeacherReport)> {
    let check_every = check_every.max(1);
    train_teacher_with(cfg, train, test, |step, net| step % check_every != 0 || accuracy(net, test) < target)
}
