//! Mini-batch SGD for the selector: momentum, weight decay, step learning
//! rate, per-batch positive weights and online hard example mining.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::LabelRecord;
use crate::synthbench::SceneSample;

use super::augment::augment;
use super::features::FeatureExtractor;
use super::loss::{class_balanced_bce, compute_beta, ohem_filter, sigmoid};
use super::net::{select, SelectorNet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lr_initial: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_epochs: usize,
    pub lr_floor: f64,
    pub ohem_fraction: f64,
    pub beta_clamp: f64,
    pub p_mask_initial: f64,
    pub p_mask_final: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            momentum: 0.9,
            weight_decay: 5e-4,
            lr_initial: 1e-3,
            lr_decay_factor: 0.1,
            lr_decay_epochs: 20,
            lr_floor: 1e-6,
            ohem_fraction: 0.5,
            beta_clamp: 0.05,
            p_mask_initial: 0.3,
            p_mask_final: 0.0,
            hidden: vec![32, 32],
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.batch_size > 0
            && self.lr_initial > 0.0
            && self.lr_floor > 0.0
            && self.lr_decay_epochs > 0
            && self.lr_decay_factor > 0.0
            && self.lr_decay_factor < 1.0
            && self.ohem_fraction > 0.0
            && self.ohem_fraction <= 1.0
            && (0.0..0.5).contains(&self.beta_clamp)
            && (0.0..=1.0).contains(&self.p_mask_initial)
            && (0.0..=1.0).contains(&self.p_mask_final)
            && !self.hidden.contains(&0);
        if ok {
            Ok(())
        } else {
            Err(Error::input("training config out of range"))
        }
    }

    /// Learning rate for 1-based `epoch`, `None` once it drops below the floor.
    pub fn learning_rate(&self, epoch: usize) -> Option<f64> {
        let steps = (epoch.saturating_sub(1) / self.lr_decay_epochs) as i32;
        let lr = self.lr_initial * self.lr_decay_factor.powi(steps);
        // Relative slack so 1e-3 * 0.1^3 still counts as 1e-6.
        (lr >= self.lr_floor * (1.0 - 1e-9)).then_some(lr)
    }

    pub fn total_epochs(&self) -> usize {
        let mut e = 0;
        while self.learning_rate(e + 1).is_some() {
            e += 1;
        }
        e
    }

    /// Linear interpolation from `p_mask_initial` (first epoch) to
    /// `p_mask_final` (last epoch).
    pub fn p_mask(&self, epoch: usize) -> f64 {
        let total = self.total_epochs();
        if total <= 1 {
            return self.p_mask_initial;
        }
        let t = (epoch.saturating_sub(1)) as f64 / (total - 1) as f64;
        self.p_mask_initial + (self.p_mask_final - self.p_mask_initial) * t.min(1.0)
    }

    pub fn layer_dims(&self, input: usize, output: usize) -> Vec<usize> {
        std::iter::once(input).chain(self.hidden.iter().copied()).chain(std::iter::once(output)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub p_mask: f64,
    /// Mean per-sample loss over the hard examples kept in each batch.
    pub mean_loss: f64,
    /// Accuracy on the un-augmented training records after the epoch.
    pub train_accuracy: f64,
    pub batch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

/// Loss and gradient of one mini-batch. Positive weights come from all
/// rows; the loss averages the per-sample sums over the `retained` rows.
pub struct BatchLoss {
    pub per_sample: Vec<f64>,
    pub retained: Vec<usize>,
    pub loss: f64,
    pub grad: SelectorNet,
}

pub fn batch_loss(
    net: &SelectorNet,
    features: &[&[f64]],
    targets: &[&[u8]],
    beta_clamp: f64,
    ohem_fraction: f64,
) -> Result<BatchLoss> {
    let betas = compute_beta(targets, beta_clamp);
    batch_loss_with(net, features, targets, &betas, |losses| ohem_filter(losses, ohem_fraction))
}

/// Like [`batch_loss`] with explicit positive weights and retention rule.
pub fn batch_loss_with(
    net: &SelectorNet,
    features: &[&[f64]],
    targets: &[&[u8]],
    betas: &[f64],
    retain: impl FnOnce(&[f64]) -> Vec<usize>,
) -> Result<BatchLoss> {
    let mut caches = Vec::with_capacity(features.len());
    let mut per_sample = Vec::with_capacity(features.len());
    let mut dlogits = Vec::with_capacity(features.len());
    for (x, t) in features.iter().zip(targets) {
        let cache = net.forward_cached(x)?;
        let probs: Vec<f64> = cache.logits().iter().map(|&z| sigmoid(z)).collect();
        let (l, g) = class_balanced_bce(&probs, t, betas);
        per_sample.push(l);
        dlogits.push(g);
        caches.push(cache);
    }
    let retained = retain(&per_sample);
    let mut grad = net.zeros_like();
    let scale = 1.0 / retained.len().max(1) as f64;
    for &i in &retained {
        net.backward(&caches[i], &dlogits[i], scale, &mut grad);
    }
    let loss = retained.iter().map(|&i| per_sample[i]).sum::<f64>() * scale;
    Ok(BatchLoss { per_sample, retained, loss, grad })
}

/// Heavy-ball SGD with L2 weight decay on every parameter:
/// `v = momentum * v + (g + wd * w)`, `w -= lr * v`.
pub struct Sgd {
    velocity: SelectorNet,
    momentum: f64,
    weight_decay: f64,
}

impl Sgd {
    pub fn new(net: &SelectorNet, momentum: f64, weight_decay: f64) -> Self {
        Self { velocity: net.zeros_like(), momentum, weight_decay }
    }

    pub fn step(&mut self, net: &mut SelectorNet, grad: &SelectorNet, lr: f64) {
        for ((w, v), g) in net.params_mut().zip(self.velocity.params_mut()).zip(grad.params()) {
            *v = self.momentum * *v + g + self.weight_decay * *w;
            *w -= lr * *v;
        }
    }
}

/// Augmented training views: the source scene for each record and the
/// extractor that turns an augmented scene back into features.
pub struct Augmentation<'a> {
    pub scenes: &'a [SceneSample],
    pub extractor: &'a dyn FeatureExtractor,
}

fn check_dataset(dataset: &[LabelRecord]) -> Result<(usize, usize)> {
    let first = dataset.first().ok_or_else(|| Error::input("training set is empty"))?;
    let (d, k) = (first.features.len(), first.labels.len());
    if d == 0 || k == 0 {
        return Err(Error::input("records need at least one feature and one label"));
    }
    for r in dataset {
        if r.features.len() != d || r.labels.len() != k {
            return Err(Error::input(format!("record {:?} has inconsistent dimensions", r.image_id)));
        }
    }
    Ok((d, k))
}

pub fn train(dataset: &[LabelRecord], cfg: &TrainConfig) -> Result<(SelectorNet, TrainLog)> {
    train_impl(dataset, None, cfg)
}

/// Trains on freshly augmented views every epoch, with the masking
/// probability annealed over the schedule.
pub fn train_augmented(dataset: &[LabelRecord], aug: &Augmentation<'_>, cfg: &TrainConfig) -> Result<(SelectorNet, TrainLog)> {
    train_impl(dataset, Some(aug), cfg)
}

fn train_impl(dataset: &[LabelRecord], aug: Option<&Augmentation<'_>>, cfg: &TrainConfig) -> Result<(SelectorNet, TrainLog)> {
    cfg.validate()?;
    let (d, k) = check_dataset(dataset)?;
    let sources: Option<Vec<&SceneSample>> = match aug {
        None => None,
        Some(a) => {
            if a.extractor.dim() != d {
                return Err(Error::input(format!("extractor dimension {} != feature length {d}", a.extractor.dim())));
            }
            let by_id: HashMap<&str, &SceneSample> = a.scenes.iter().map(|s| (s.image_id.as_str(), s)).collect();
            Some(
                dataset
                    .iter()
                    .map(|r| {
                        by_id
                            .get(r.image_id.as_str())
                            .copied()
                            .ok_or_else(|| Error::input(format!("no scene for record {:?}", r.image_id)))
                    })
                    .collect::<Result<_>>()?,
            )
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = SelectorNet::init(&cfg.layer_dims(d, k), &mut rng)?;
    let mut sgd = Sgd::new(&net, cfg.momentum, cfg.weight_decay);
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..dataset.len()).collect();

    let mut epoch = 1;
    while let Some(lr) = cfg.learning_rate(epoch) {
        let p_mask = cfg.p_mask(epoch);
        order.shuffle(&mut rng);
        let epoch_features: Vec<Vec<f64>> = match (&sources, aug) {
            (Some(src), Some(a)) => src
                .iter()
                .map(|s| a.extractor.extract(&augment(s, &mut rng, p_mask).0))
                .collect(),
            _ => Vec::new(),
        };
        let mut batch_losses = Vec::new();
        let mut retained_total = 0.0;
        let mut retained_count = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let xs: Vec<&[f64]> = chunk
                .iter()
                .map(|&i| if epoch_features.is_empty() { &dataset[i].features[..] } else { &epoch_features[i][..] })
                .collect();
            let ys: Vec<&[u8]> = chunk.iter().map(|&i| &dataset[i].labels[..]).collect();
            let bl = batch_loss(&net, &xs, &ys, cfg.beta_clamp, cfg.ohem_fraction)?;
            if !bl.loss.is_finite() || bl.grad.params().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
            }
            sgd.step(&mut net, &bl.grad, lr);
            if net.params().any(|w| !w.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
            }
            batch_losses.push(bl.loss);
            retained_total += bl.loss * bl.retained.len() as f64;
            retained_count += bl.retained.len();
        }
        log.epochs.push(EpochLog {
            epoch,
            lr,
            p_mask,
            mean_loss: retained_total / retained_count.max(1) as f64,
            train_accuracy: selector_accuracy(&net, dataset, false)?,
            batch_losses,
        });
        epoch += 1;
    }
    Ok((net, log))
}

/// Fraction of records whose selected model carries a positive label.
/// All-negative records count as misses unless `exclude_unlabeled`.
pub fn selector_accuracy(net: &SelectorNet, dataset: &[LabelRecord], exclude_unlabeled: bool) -> Result<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for r in dataset {
        if exclude_unlabeled && !r.has_positive() {
            continue;
        }
        total += 1;
        if r.is_positive(select(net, &r.features)?) {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(Error::input("no records to score"));
    }
    Ok(hits as f64 / total as f64)
}
