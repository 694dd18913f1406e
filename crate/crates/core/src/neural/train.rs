//! Minibatch training loop shared by the generators, the language model and
//! the classifier.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};

use super::adadelta::{AdadeltaConfig, AdadeltaState};
use super::model::{LossStat, Objective};
use super::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Stop after this many epochs without dev-loss improvement. Ignored without dev data.
    pub patience: Option<usize>,
    /// Rescale the minibatch gradient to this global L2 norm when exceeded.
    pub clip_norm: Option<f64>,
    pub optimizer: AdadeltaConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 20,
            batch_size: 256,
            patience: Some(3),
            clip_norm: Some(5.0),
            optimizer: AdadeltaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-prediction loss over the whole training set after the epoch.
    pub train_loss: f64,
    pub dev_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub initial_train_loss: f64,
    pub initial_dev_loss: Option<f64>,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned (0 = initial).
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainingLog {
    /// Training loss before training followed by the loss after each epoch.
    pub fn train_curve(&self) -> Vec<f64> {
        core::iter::once(self.initial_train_loss)
            .chain(self.epochs.iter().map(|e| e.train_loss))
            .collect()
    }

    pub fn dev_curve(&self) -> Vec<f64> {
        self.initial_dev_loss
            .into_iter()
            .chain(self.epochs.iter().filter_map(|e| e.dev_loss))
            .collect()
    }
}

/// Mean per-prediction loss over `examples`.
pub fn mean_loss<M: Objective>(model: &M, examples: &[M::Example]) -> f64 {
    let mut stat = LossStat::default();
    for example in examples {
        stat += model.loss(example);
    }
    stat.mean()
}

/// Trains with shuffled minibatches and Adadelta. Each minibatch minimizes the
/// summed loss divided by the number of examples in the batch.
///
/// With dev data and a patience, training stops once the dev loss has not
/// improved for `patience` epochs and the best-dev parameters are returned.
pub fn fit<M, F>(
    mut model: M,
    train: &[M::Example],
    dev: &[M::Example],
    config: &TrainConfig,
    rng: &mut Rng,
    mut on_epoch: F,
) -> Result<(M, TrainingLog)>
where
    M: Objective,
    F: FnMut(&EpochRecord),
{
    if config.batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    let has_dev = !dev.is_empty();
    let mut log = TrainingLog {
        initial_train_loss: mean_loss(&model, train),
        initial_dev_loss: has_dev.then(|| mean_loss(&model, dev)),
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    if !log.initial_train_loss.is_finite() {
        return Err(Error::Divergence {
            epoch: 0,
            batch: 0,
            loss: log.initial_train_loss,
        });
    }
    if config.max_epochs == 0 || train.is_empty() {
        return Ok((model, log));
    }

    let mut optimizer = AdadeltaState::new(config.optimizer, &model.tensors())?;
    let mut grads = model.zeros_like();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, M)> = log.initial_dev_loss.map(|d| (d, model.clone()));
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(rng);
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            grads.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
            let mut stat = LossStat::default();
            for &i in chunk {
                stat += model.accumulate_gradient(&train[i], &mut grads);
            }
            if !stat.total.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch,
                    loss: stat.total,
                });
            }
            let mut scale = 1.0 / chunk.len() as f64;
            if let Some(max_norm) = config.clip_norm {
                let norm = libm::sqrt(grads.tensors().iter().map(|t| t.sum_sq()).sum::<f64>()) * scale;
                if norm > max_norm {
                    scale *= max_norm / norm;
                }
            }
            grads.tensors_mut().into_iter().for_each(|t| t.scale(scale));
            let mut params = model.tensors_mut();
            optimizer
                .update(&mut params, &grads.tensors())
                .map_err(|e| match e {
                    Error::NonFinite(_) => Error::Divergence {
                        epoch,
                        batch,
                        loss: stat.total,
                    },
                    other => other,
                })?;
        }

        let record = EpochRecord {
            epoch,
            train_loss: mean_loss(&model, train),
            dev_loss: has_dev.then(|| mean_loss(&model, dev)),
        };
        if !record.train_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: 0,
                loss: record.train_loss,
            });
        }
        on_epoch(&record);
        log.epochs.push(record);

        if let Some(dev_loss) = record.dev_loss {
            match &best {
                Some((b, _)) if dev_loss >= *b => since_best += 1,
                _ => {
                    best = Some((dev_loss, model.clone()));
                    log.best_epoch = epoch;
                    since_best = 0;
                }
            }
            if config.patience.is_some_and(|p| since_best >= p) {
                log.stopped_early = true;
                break;
            }
        } else {
            log.best_epoch = epoch;
        }
    }

    if let Some((_, best_model)) = best {
        model = best_model;
    }
    Ok((model, log))
}
