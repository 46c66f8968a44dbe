//! Adapter-only training and P/R/F1 evaluation of the clone pipeline.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ClonePipeline, EncodedPair, HostError, Optimizer, OptimizerKind};
use crate::adapter::Checkpoint;
use crate::numerics::ops;
use crate::numerics::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Only used by AdamW.
    pub weight_decay: f64,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    /// The desk-scale demo: a larger learning rate than the `clone` preset,
    /// since the host is tiny and randomly initialized.
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::AdamW,
            lr: 3e-3,
            epochs: 10,
            batch_size: 8,
            weight_decay: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub const PRESETS: [&'static str; 3] = ["desk", "clone", "summarization"];

    pub fn preset(name: &str) -> Option<Self> {
        let base = Self::default();
        match name {
            "desk" => Some(base),
            "clone" => Some(Self {
                optimizer: OptimizerKind::AdamW,
                lr: 5e-5,
                epochs: 10,
                batch_size: 4,
                ..base
            }),
            "summarization" => Some(Self {
                optimizer: OptimizerKind::Adam,
                lr: 1e-4,
                epochs: 20,
                batch_size: 64,
                ..base
            }),
            _ => None,
        }
    }

    pub fn check(&self) -> Result<(), HostError> {
        if self.batch_size == 0 {
            return Err(HostError::Config("batch_size must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(HostError::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(HostError::Config(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Binary metrics with "clone" as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

/// Precision is 0 without positive predictions, recall 0 without positive
/// labels, F1 0 when both are 0.
pub fn binary_metrics(predicted: &[bool], actual: &[bool]) -> Metrics {
    let mut m = Metrics::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p, a) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, true) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    m.precision = ratio(m.tp, m.tp + m.fp);
    m.recall = ratio(m.tp, m.tp + m.fn_);
    m.f1 = if m.precision + m.recall == 0.0 {
        0.0
    } else {
        2.0 * m.precision * m.recall / (m.precision + m.recall)
    };
    m
}

fn logits(p: &ClonePipeline, pair: &EncodedPair) -> Result<Matrix, HostError> {
    let pass = p.head.forward(&p.represent(&pair.a)?, &p.represent(&pair.b)?)?;
    Ok(pass.logits)
}

/// Mean cross-entropy and metrics at `threshold` (a pair is predicted a
/// clone when p(clone) > threshold).
fn assess(p: &ClonePipeline, pairs: &[EncodedPair], threshold: f64) -> Result<(f64, Metrics), HostError> {
    if pairs.is_empty() {
        return Err(HostError::EmptyDataset);
    }
    let all: Vec<Matrix> = pairs.par_iter().map(|pair| logits(p, pair)).collect::<Result<_, _>>()?;
    let mut loss = 0.0;
    let mut predicted = Vec::with_capacity(pairs.len());
    for (l, pair) in all.iter().zip(pairs) {
        loss += ops::cross_entropy_with_logits(l, &[usize::from(pair.label)])?.0;
        predicted.push(ops::softmax(l.row(0))[1] > threshold);
    }
    let actual: Vec<bool> = pairs.iter().map(|x| x.label).collect();
    Ok((loss / pairs.len() as f64, binary_metrics(&predicted, &actual)))
}

pub fn evaluate(p: &ClonePipeline, pairs: &[EncodedPair], threshold: f64) -> Result<Metrics, HostError> {
    Ok(assess(p, pairs, threshold)?.1)
}

/// Loss and flat gradient (adapters, then head) for one pair.
fn pair_gradient(p: &ClonePipeline, pair: &EncodedPair) -> Result<(f64, Vec<f64>), HostError> {
    let adapters = p
        .adapters
        .as_ref()
        .ok_or_else(|| HostError::Config("training needs adapters".into()))?;
    let out_a = p.encoder.forward(&pair.a.ids, &pair.a.index, Some(adapters), true)?;
    let out_b = p.encoder.forward(&pair.b.ids, &pair.b.index, Some(adapters), true)?;
    let pass = p.head.forward(out_a.hidden.row(0), out_b.hidden.row(0))?;
    let target = [usize::from(pair.label)];
    let (loss, probs) = ops::cross_entropy_with_logits(&pass.logits, &target)?;
    let (head_grads, g_a, g_b) = p.head.backward(&pass, &ops::cross_entropy_backward(&probs, &target))?;

    let first_row = |rows: usize, g: &[f64]| {
        let mut m = Matrix::zeros(rows, g.len());
        m.row_mut(0).copy_from_slice(g);
        m
    };
    let mut grads = p
        .encoder
        .backward(&out_a, adapters, &first_row(out_a.hidden.rows(), &g_a))?;
    let grads_b = p
        .encoder
        .backward(&out_b, adapters, &first_row(out_b.hidden.rows(), &g_b))?;
    for (l, g) in grads.layers.iter_mut().zip(&grads_b.layers) {
        l.add_assign(g);
    }
    let mut flat = grads.flatten();
    flat.extend(head_grads.flatten());
    Ok((loss, flat))
}

fn digest(values: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for v in values {
        hasher.update(v.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    /// Mean training loss of each epoch, over its minibatch updates.
    pub epoch_losses: Vec<f64>,
    /// Full-pass training loss before the first and after the last update.
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub val_per_epoch: Vec<Metrics>,
    /// Epoch (from 1) whose parameters were kept; `None` keeps the initial ones.
    pub best_epoch: Option<usize>,
    /// Validation metrics of the kept parameters.
    pub validation: Metrics,
    pub steps: usize,
    pub trainable_digest_before: String,
    pub trainable_digest_after: String,
    pub frozen_digest_before: String,
    pub frozen_digest_after: String,
}

impl TrainReport {
    pub fn frozen_unchanged(&self) -> bool {
        self.frozen_digest_before == self.frozen_digest_after
    }
}

fn trainable(p: &ClonePipeline) -> Vec<f64> {
    let mut flat = p.adapters.as_ref().map(|a| a.flatten()).unwrap_or_default();
    flat.extend(p.head.flatten());
    flat
}

fn assign_trainable(p: &mut ClonePipeline, flat: &[f64]) {
    let adapters = p.adapters.as_mut().expect("checked before training");
    let n = adapters.parameter_count();
    adapters.assign_flat(&flat[..n]);
    p.head.assign_flat(&flat[n..]);
}

/// Trains adapters and head; the encoder is only read. The parameters with
/// the best validation F1 (first epoch on ties, initial ones if no epoch
/// improves) are left in `p`, and also returned as a checkpoint.
pub fn train_adapters(
    p: &mut ClonePipeline,
    train: &[EncodedPair],
    val: &[EncodedPair],
    cfg: &TrainConfig,
) -> Result<(TrainReport, Checkpoint), HostError> {
    cfg.check()?;
    if train.is_empty() || val.is_empty() {
        return Err(HostError::EmptyDataset);
    }
    if p.adapters.is_none() {
        return Err(HostError::Config("training needs adapters".into()));
    }
    let frozen_before = p.encoder.digest();
    let mut params = trainable(p);
    let trainable_before = digest(&params);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, cfg.weight_decay, params.len());

    let (initial_train_loss, _) = assess(p, train, 0.5)?;
    let (_, mut best) = assess(p, val, 0.5)?;
    let mut best_params = params.clone();
    let mut best_epoch = None;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut val_per_epoch = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let per_pair: Vec<(f64, Vec<f64>)> = chunk
                .par_iter()
                .map(|&i| pair_gradient(p, &train[i]))
                .collect::<Result<_, _>>()?;
            let mut grad = vec![0.0; params.len()];
            let mut loss = 0.0;
            for (l, g) in &per_pair {
                loss += l;
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            let k = chunk.len() as f64;
            if !loss.is_finite() {
                return Err(HostError::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch,
                    loss: loss / k,
                });
            }
            total += loss;
            grad.iter_mut().for_each(|g| *g /= k);
            opt.step(&mut params, &grad);
            assign_trainable(p, &params);
        }
        epoch_losses.push(total / train.len() as f64);
        let (_, m) = assess(p, val, 0.5)?;
        val_per_epoch.push(m);
        if m.f1 > best.f1 {
            best = m;
            best_params = params.clone();
            best_epoch = Some(epoch + 1);
        }
    }

    let (final_train_loss, _) = assess(p, train, 0.5)?;
    assign_trainable(p, &best_params);
    let mut ckpt = Checkpoint::from_adapters(p.adapters.as_ref().expect("checked"));
    p.head.add_to(&mut ckpt);

    let report = TrainReport {
        config: cfg.clone(),
        epoch_losses,
        initial_train_loss,
        final_train_loss,
        val_per_epoch,
        best_epoch,
        validation: best,
        steps: opt.steps() as usize,
        trainable_digest_before: trainable_before,
        trainable_digest_after: digest(&trainable(p)),
        frozen_digest_before: frozen_before,
        frozen_digest_after: p.encoder.digest(),
    };
    Ok((report, ckpt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_conventions() {
        let m = binary_metrics(&[true, true, true, false], &[true, true, false, true]);
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (2, 1, 1, 0));
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);

        let m = binary_metrics(&[false, false], &[true, false]);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        let m = binary_metrics(&[true, false], &[true, false]);
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn presets() {
        let p = TrainConfig::preset("clone").unwrap();
        assert_eq!(
            (p.optimizer, p.lr, p.batch_size, p.epochs),
            (OptimizerKind::AdamW, 5e-5, 4, 10)
        );
        let p = TrainConfig::preset("summarization").unwrap();
        assert_eq!(
            (p.optimizer, p.lr, p.batch_size, p.epochs),
            (OptimizerKind::Adam, 1e-4, 64, 20)
        );
        assert!(TrainConfig::preset("nope").is_none());
    }
}
