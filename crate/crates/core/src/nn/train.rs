use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::loss::loss_ce_l2sp;
use super::model::CnnModel;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::preprocess::AugmentPolicy;
use crate::rng::stream_rng;

/// Val-loss decrease that counts as an improvement.
pub const IMPROVEMENT_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub lambda: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub plateau_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub augmentation: AugmentPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            lambda: 1e-4,
            max_epochs: 50,
            patience: 5,
            plateau_epochs: 3,
            batch_size: 16,
            seed: 0,
            augmentation: AugmentPolicy::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.lambda >= 0.0
            && self.lambda.is_finite()
            && self.max_epochs > 0
            && self.patience > 0
            && self.plateau_epochs > 0
            && self.batch_size > 0
            && self.patience <= self.max_epochs;
        if !ok {
            return Err(Error::InvalidArgument(format!("invalid training config: {self:?}")));
        }
        self.augmentation.validate()
    }
}

/// A preprocessed image and its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub image: GrayImage,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean regularized loss over the epoch's batches.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Accuracy on an optional held-out monitor set.
    pub monitor_accuracy: Option<f64>,
    /// Layer released at the end of this epoch.
    pub unfrozen: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose weights were returned.
    pub best_epoch: usize,
}

impl TrainHistory {
    /// First epoch whose monitor accuracy reaches `target`.
    pub fn epochs_to_accuracy(&self, target: f64) -> Option<usize> {
        self.epochs
            .iter()
            .find(|e| e.monitor_accuracy.is_some_and(|a| a >= target))
            .map(|e| e.epoch)
    }
}

/// Mean cross-entropy and accuracy without gradient work.
pub fn evaluate_set(model: &CnnModel, set: &[TrainExample]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for chunk in set.chunks(32) {
        let imgs: Vec<&GrayImage> = chunk.iter().map(|e| &e.image).collect();
        let labels: Vec<usize> = chunk.iter().map(|e| e.target).collect();
        let (logits, _) = model.forward(&Tensor::from_images(&imgs)?)?;
        let out = loss_ce_l2sp(&logits, &labels, &[], &[], 0.0)?;
        loss += out.ce * chunk.len() as f64;
        for (i, &y) in labels.iter().enumerate() {
            if argmax(logits.row(i)) == y {
                correct += 1;
            }
        }
    }
    Ok((loss / set.len() as f64, correct as f64 / set.len() as f64))
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn train(model: &CnnModel, train: &[TrainExample], val: &[TrainExample], cfg: &TrainConfig) -> Result<(CnnModel, TrainHistory)> {
    train_monitored(model, train, val, None, cfg)
}

/// Mini-batch Adam on CE + L2-SP with early stopping on validation loss.
///
/// A plateau of `plateau_epochs` releases the deepest frozen layer, but only
/// while some layer is already trainable: a fully frozen model is evaluated,
/// never updated. `monitor` is scored after every epoch and does not affect
/// training.
pub fn train_monitored(
    model: &CnnModel,
    train: &[TrainExample],
    val: &[TrainExample],
    monitor: Option<&[TrainExample]>,
    cfg: &TrainConfig,
) -> Result<(CnnModel, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument("training and validation sets must be nonempty".into()));
    }
    if let Some(e) = train.iter().chain(val).find(|e| e.target >= model.num_classes()) {
        return Err(Error::InvalidArgument(format!(
            "target {} out of range for {} classes",
            e.target,
            model.num_classes()
        )));
    }
    let mut m = model.clone();
    let mut adam = AdamState::new(m.num_params());
    let mut best: Option<(f64, CnnModel, usize)> = None;
    let mut stale = 0usize;
    let mut plateau = 0usize;
    let mut history = Vec::new();
    let augment = !cfg.augmentation.is_identity();
    let n = train.len();
    for epoch in 1..=cfg.max_epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream_rng(cfg.seed, epoch as u64));
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let trainable = m.trainable_mask();
        let any_trainable = trainable.contains(&true);
        for chunk in order.chunks(cfg.batch_size) {
            let imgs: Vec<GrayImage> = chunk
                .iter()
                .map(|&i| {
                    if augment {
                        let idx = ((epoch - 1) * n + i) as u64;
                        cfg.augmentation.draw(idx).apply(&train[i].image)
                    } else {
                        train[i].image.clone()
                    }
                })
                .collect();
            let refs: Vec<&GrayImage> = imgs.iter().collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| train[i].target).collect();
            let (logits, cache) = m.forward(&Tensor::from_images(&refs)?)?;
            let out = loss_ce_l2sp(&logits, &labels, &m.theta, &m.anchor, cfg.lambda)?;
            loss_sum += out.loss;
            batches += 1;
            if !any_trainable {
                continue;
            }
            let mut grads = m.backward(&cache, &out.dlogits)?;
            for (g, p) in grads.iter_mut().zip(&out.penalty_grad) {
                *g += p;
            }
            adam_step(&mut m.theta, &grads, &mut adam, cfg.learning_rate, &trainable)?;
        }
        let (val_loss, val_accuracy) = evaluate_set(&m, val)?;
        let monitor_accuracy = match monitor {
            Some(set) if !set.is_empty() => Some(evaluate_set(&m, set)?.1),
            _ => None,
        };
        let improved = best.as_ref().is_none_or(|(b, _, _)| val_loss < b - IMPROVEMENT_THRESHOLD);
        if improved {
            best = Some((val_loss, m.clone(), epoch));
            stale = 0;
            plateau = 0;
        } else {
            stale += 1;
            plateau += 1;
        }
        let mut unfrozen = None;
        if plateau >= cfg.plateau_epochs && m.has_trainable() {
            if let Some(l) = m.deepest_frozen() {
                m.frozen[l] = false;
                unfrozen = Some(l);
                plateau = 0;
            }
        }
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_loss,
            val_accuracy,
            monitor_accuracy,
            unfrozen,
        });
        if stale >= cfg.patience {
            break;
        }
    }
    let (_, best_model, best_epoch) = best.expect("at least one epoch ran");
    Ok((
        best_model,
        TrainHistory {
            epochs: history,
            best_epoch,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::ArchSpec;

    fn toy(n: usize, side: usize) -> Vec<TrainExample> {
        (0..n)
            .map(|i| {
                let px: Vec<f64> = (0..side * side)
                    .map(|p| if (p + i) % (i + 2) == 0 { 0.9 } else { 0.1 * (i % 3) as f64 })
                    .collect();
                TrainExample {
                    image: GrayImage::from_unit(side, side, px).unwrap(),
                    target: i % 3,
                }
            })
            .collect()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-2,
            lambda: 0.0,
            max_epochs: 200,
            patience: 200,
            batch_size: 4,
            seed: 3,
            augmentation: AugmentPolicy::identity(),
            ..TrainConfig::default()
        }
    }

    #[test]
    fn memorizes_four_samples() {
        let data = toy(4, 8);
        let m = CnnModel::new(ArchSpec::default().with_input(8, 8), 1).unwrap();
        let (_, h) = train(&m, &data, &data, &quick()).unwrap();
        let last = h.epochs.last().unwrap();
        assert!(last.train_loss < 0.05, "train loss {}", last.train_loss);
    }

    #[test]
    fn single_epoch_and_determinism() {
        let data = toy(6, 8);
        let m = CnnModel::new(ArchSpec::default().with_input(8, 8), 2).unwrap();
        let cfg = TrainConfig {
            max_epochs: 1,
            patience: 1,
            augmentation: AugmentPolicy {
                seed: 5,
                ..AugmentPolicy::default()
            },
            ..quick()
        };
        let (a, ha) = train(&m, &data, &data[..3], &cfg).unwrap();
        let (b, hb) = train(&m, &data, &data[..3], &cfg).unwrap();
        assert_eq!(ha.epochs.len(), 1);
        assert_eq!(ha.best_epoch, 1);
        assert_ne!(a.theta, m.theta);
        assert_eq!(a, b);
        assert_eq!(ha, hb);
    }

    #[test]
    fn returns_best_val_epoch() {
        let data = toy(6, 8);
        let m = CnnModel::new(ArchSpec::default().with_input(8, 8), 4).unwrap();
        let cfg = TrainConfig {
            max_epochs: 12,
            patience: 12,
            learning_rate: 0.05,
            ..quick()
        };
        let (best, h) = train(&m, &data, &data[3..], &cfg).unwrap();
        let (vl, _) = evaluate_set(&best, &data[3..]).unwrap();
        let rec = &h.epochs[h.best_epoch - 1];
        assert_eq!(vl, rec.val_loss);
        let min = h.epochs.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
        assert!(rec.val_loss <= min + IMPROVEMENT_THRESHOLD);
    }

    #[test]
    fn fully_frozen_model_is_untouched() {
        let data = toy(5, 8);
        let mut m = CnnModel::new(ArchSpec::default().with_input(8, 8), 1).unwrap();
        m.freeze_all();
        let cfg = TrainConfig {
            max_epochs: 10,
            patience: 10,
            plateau_epochs: 1,
            ..quick()
        };
        let (out, h) = train(&m, &data, &data, &cfg).unwrap();
        assert_eq!(out.theta, m.theta);
        assert_eq!(h.epochs.len(), 10);
        assert!(h.epochs.iter().all(|e| e.unfrozen.is_none()));
    }

    #[test]
    fn plateau_unfreezes_deepest_first() {
        let data = toy(5, 8);
        let m = CnnModel::new(ArchSpec::default().with_input(8, 8), 1).unwrap();
        let ft = m.replace_head(3, 9).unwrap();
        // a vanishing step size makes every epoch a plateau
        let cfg = TrainConfig {
            learning_rate: 1e-300,
            max_epochs: 12,
            patience: 12,
            plateau_epochs: 2,
            ..quick()
        };
        let (_, h) = train(&ft, &data, &data, &cfg).unwrap();
        let released: Vec<usize> = h.epochs.iter().filter_map(|e| e.unfrozen).collect();
        let mut expect = ft.param_layers();
        expect.pop();
        expect.reverse();
        assert_eq!(released, expect);
    }

    #[test]
    fn rejects_bad_input() {
        let data = toy(3, 8);
        let m = CnnModel::new(ArchSpec::default().with_input(8, 8), 1).unwrap();
        assert!(train(&m, &data, &[], &quick()).is_err());
        let cfg = TrainConfig { patience: 300, ..quick() };
        assert!(train(&m, &data, &data, &cfg).is_err());
    }
}
