//! Mini-batch training with early stopping.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::network::{backward_f64, forward_f64, soft_dice_loss, Gradients, Network, SegmenterParams};
use crate::augment::{random_augment, AugmentConfig};
use crate::curriculum::{order_epoch_with, CurriculumSchedule, OrderingStrategy};
use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::grid::{Image2D, MaskGrid};
use crate::motion::SeverityCategory;
use crate::rng::{Purpose, SimRng};

/// Minimum decrease of the validation loss that counts as improvement.
pub const IMPROVEMENT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub strategy: OrderingStrategy,
    pub schedule: CurriculumSchedule,
    pub seed: u64,
    /// Probability that a training sample receives one random augmentation.
    pub augment_prob: f64,
    pub augment: AugmentConfig,
    /// Worker threads for per-sample gradients; results do not depend on it.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 30,
            patience: 7,
            batch_size: 8,
            lr: 1e-3,
            strategy: OrderingStrategy::Shuffled,
            schedule: CurriculumSchedule::PerEpoch,
            seed: 0,
            augment_prob: 0.5,
            augment: AugmentConfig::default(),
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::validation("max_epochs must be at least 1"));
        }
        if !(4..=16).contains(&self.batch_size) {
            return Err(Error::validation(format!("batch_size {} outside 4..=16", self.batch_size)));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::validation(format!("learning rate {} must be positive", self.lr)));
        }
        if !(0.0..=1.0).contains(&self.augment_prob) {
            return Err(Error::validation(format!("augment_prob {} outside [0, 1]", self.augment_prob)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Seconds since the start of training at the end of each epoch.
    pub wall_time_s: Vec<f64>,
    /// Last epoch run (1-based).
    pub stopped_epoch: usize,
    /// Epoch whose parameters were returned (1-based).
    pub best_epoch: usize,
    pub early_stopped: bool,
}

impl TrainLog {
    /// Copy with timings zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> TrainLog {
        TrainLog {
            wall_time_s: vec![0.0; self.wall_time_s.len()],
            ..self.clone()
        }
    }
}

/// Patience bookkeeping over a stream of validation losses.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    epoch: usize,
    bad: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            epoch: 0,
            bad: 0,
        }
    }

    /// Records one epoch; returns true if it is the new best.
    pub fn observe(&mut self, val_loss: f64) -> bool {
        self.epoch += 1;
        if val_loss < self.best - IMPROVEMENT_EPS {
            self.best = val_loss;
            self.best_epoch = self.epoch;
            self.bad = 0;
            true
        } else {
            self.bad += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.bad >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

/// (stopped_epoch, best_epoch) for a precomputed loss sequence.
pub fn early_stopping_outcome(val_losses: &[f64], patience: usize, max_epochs: usize) -> (usize, usize) {
    let mut es = EarlyStopping::new(patience);
    let mut stopped = 0;
    for &v in val_losses.iter().take(max_epochs) {
        es.observe(v);
        stopped += 1;
        if es.should_stop() {
            break;
        }
    }
    (stopped, es.best_epoch())
}

/// Per-sample loss and gradient, evaluated on up to `threads` workers and
/// returned in input order.
fn per_sample_gradients(net: &Network<f64>, batch: &[(Image2D, MaskGrid)], threads: usize) -> Result<Vec<(f64, Gradients)>> {
    let threads = threads.clamp(1, batch.len().max(1));
    if threads == 1 {
        return batch.iter().map(|(x, y)| backward_f64(net, x, y)).collect();
    }
    let chunk = batch.len().div_ceil(threads);
    let parts: Vec<Result<Vec<(f64, Gradients)>>> = std::thread::scope(|s| {
        let handles: Vec<_> = batch
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|(x, y)| backward_f64(net, x, y)).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("gradient worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(batch.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Mean soft dice loss over `samples` without augmentation.
pub fn mean_loss(params: &SegmenterParams, samples: &[Sample]) -> Result<f64> {
    let net = params.to_f64();
    let mut total = 0.0;
    for s in samples {
        total += soft_dice_loss(&forward_f64(&net, &s.image)?.foreground, &s.target);
    }
    Ok(total / samples.len() as f64)
}

fn ordering_severities(samples: &[Sample], strategy: OrderingStrategy) -> Vec<Option<SeverityCategory>> {
    samples
        .iter()
        .map(|s| match strategy {
            // shuffling ignores categories, so unlabeled sets are fine
            OrderingStrategy::Shuffled => s.severity.or(Some(SeverityCategory::Minimal)),
            OrderingStrategy::Curriculum => s.severity,
        })
        .collect()
}

/// Trains from a fresh initialisation and returns the best-validation weights.
pub fn fit(train: &[Sample], val: &[Sample], cfg: &TrainConfig) -> Result<(SegmenterParams, TrainLog)> {
    let init = SegmenterParams::he_uniform(&mut SimRng::derive(cfg.seed, Purpose::Init, 0));
    fit_from(init, train, val, cfg)
}

pub fn fit_from(
    init: SegmenterParams,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
) -> Result<(SegmenterParams, TrainLog)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::validation("training set is empty"));
    }
    if val.is_empty() {
        return Err(Error::validation("validation set is empty"));
    }
    let severities = ordering_severities(train, cfg.strategy);
    let start = Instant::now();
    let mut theta: Vec<f64> = init.flatten().into_iter().map(f64::from).collect();
    let mut adam = AdamState::new(theta.len(), cfg.lr);
    let mut params = init;
    let mut best = params.clone();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut log = TrainLog {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        wall_time_s: Vec::new(),
        stopped_epoch: 0,
        best_epoch: 0,
        early_stopped: false,
    };

    for epoch in 0..cfg.max_epochs {
        let order = order_epoch_with(&severities, cfg.strategy, cfg.schedule, epoch, cfg.seed)?;
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for batch_idx in order.chunks(cfg.batch_size) {
            let batch: Vec<(Image2D, MaskGrid)> = batch_idx
                .iter()
                .map(|&i| {
                    let key = (epoch as u64) << 32 | i as u64;
                    let mut rng = SimRng::derive(cfg.seed, Purpose::Augment, key);
                    random_augment(&train[i].image, &train[i].target, cfg.augment_prob, &cfg.augment, &mut rng)
                })
                .collect();
            let net = params.to_f64();
            let results = per_sample_gradients(&net, &batch, cfg.threads)?;
            let mut grad = Gradients::zeros();
            for (loss, g) in &results {
                epoch_loss += loss;
                grad.add_assign(g);
            }
            seen += results.len();
            grad.scale(1.0 / results.len() as f64);
            adam.step_slice(&mut theta, &grad.flatten());
            // weights live in f32; keep the master copy consistent with them
            let rounded: Vec<f32> = theta.iter().map(|&v| v as f32).collect();
            theta.iter_mut().zip(&rounded).for_each(|(t, &r)| *t = r as f64);
            params = SegmenterParams::unflatten(&rounded);
        }
        if !params.is_finite() {
            return Err(Error::validation(format!("non-finite weights after epoch {}", epoch + 1)));
        }
        let val_loss = mean_loss(&params, val)?;
        log.train_loss.push(epoch_loss / seen.max(1) as f64);
        log.val_loss.push(val_loss);
        log.wall_time_s.push(start.elapsed().as_secs_f64());
        log.stopped_epoch = epoch + 1;
        if stopper.observe(val_loss) {
            best = params.clone();
        }
        if stopper.should_stop() {
            log.early_stopped = true;
            break;
        }
    }
    log.best_epoch = stopper.best_epoch();
    Ok((best, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patience_semantics() {
        let mut losses = vec![1.0, 0.9];
        losses.extend(std::iter::repeat_n(0.9, 7));
        assert_eq!(early_stopping_outcome(&losses, 7, 30), (9, 2));
        assert_eq!(early_stopping_outcome(&[1.0, 0.5], 7, 1), (1, 1));
        // improvement below the threshold does not count
        assert_eq!(early_stopping_outcome(&[1.0, 1.0 - 5e-7, 0.5], 1, 30), (2, 1));
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.batch_size = 3;
        assert!(c.validate().is_err());
        c.batch_size = 16;
        c.max_epochs = 0;
        assert!(c.validate().is_err());
    }

    fn tiny_samples(n: usize, seed: u64) -> Vec<Sample> {
        let mut rng = SimRng::new(seed);
        (0..n)
            .map(|i| {
                let r0 = 2 + rng.below(4) as usize;
                let c0 = 2 + rng.below(4) as usize;
                let target = MaskGrid::from_fn(12, 12, |r, c| (r0..r0 + 5).contains(&r) && (c0..c0 + 5).contains(&c));
                let image = Image2D::from_fn(12, 12, |r, c| {
                    (target.get(r, c) as u8 as f64 * 2.0 - 0.5 + 0.1 * rng.normal()) as f32
                });
                Sample {
                    case_id: format!("t{i}"),
                    severity: Some(SeverityCategory::ALL[i % 4]),
                    image,
                    target,
                }
            })
            .collect()
    }

    #[test]
    fn empty_sets_rejected() {
        let s = tiny_samples(4, 1);
        let cfg = TrainConfig::default();
        assert!(matches!(fit(&[], &s, &cfg), Err(Error::Validation(_))));
        assert!(matches!(fit(&s, &[], &cfg), Err(Error::Validation(_))));
    }

    #[test]
    fn one_epoch_and_threads_agree() {
        let train = tiny_samples(8, 2);
        let val = tiny_samples(4, 3);
        let cfg = TrainConfig {
            max_epochs: 1,
            batch_size: 4,
            seed: 11,
            ..TrainConfig::default()
        };
        let (p1, l1) = fit(&train, &val, &cfg).unwrap();
        assert_eq!((l1.stopped_epoch, l1.best_epoch, l1.train_loss.len()), (1, 1, 1));
        assert!(!l1.early_stopped);
        let (p2, l2) = fit(&train, &val, &TrainConfig { threads: 3, ..cfg.clone() }).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(l1.without_timing(), l2.without_timing());
    }

    #[test]
    fn loss_decreases_on_easy_task() {
        let train = tiny_samples(8, 4);
        let val = tiny_samples(4, 5);
        let cfg = TrainConfig {
            max_epochs: 12,
            batch_size: 4,
            lr: 1e-2,
            augment_prob: 0.0,
            strategy: OrderingStrategy::Curriculum,
            seed: 3,
            ..TrainConfig::default()
        };
        let (_, log) = fit(&train, &val, &cfg).unwrap();
        assert!(log.best_epoch <= log.stopped_epoch);
        let best = log.val_loss[log.best_epoch - 1];
        assert!(best < log.val_loss[0] || log.best_epoch == 1);
        assert!(best < 0.5, "val loss {:?}", log.val_loss);
    }
}
