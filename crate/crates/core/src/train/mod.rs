//! Losses, reverse pass, SGD with momentum, the training loop and gradient
//! verification.

mod backward;
mod gradcheck;
mod loss;
mod optim;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, Weights};
use crate::phantom::{Label, Manifest, ManifestEntry, Split};
use crate::tensor::VideoClip;

pub use backward::{backward, BackwardOutput, Batch, BatchStats};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, EXHAUSTIVE_LIMIT, REL_FLOOR, SUBSAMPLE};
pub use loss::{logistic_loss, squared_loss, LossKind};
pub use optim::{sgd_step, update_running_stats, SgdParams};

/// Share of the previous running statistic kept on each batch-norm update.
pub const BN_KEEP: f64 = 0.9;

/// What a manifest entry is trained to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// 0 for `no_ivc`, 1 for either vessel class.
    #[default]
    Presence,
    /// The clip's contraction fraction; clips without a vessel are skipped.
    Contraction,
}

impl TargetKind {
    pub fn target(self, entry: &ManifestEntry) -> Option<f64> {
        match self {
            TargetKind::Presence => Some(entry.label.presence()),
            TargetKind::Contraction => (entry.label != Label::NoIvc).then_some(entry.contraction),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub loss_kind: LossKind,
    pub target: TargetKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.02,
            momentum: 0.9,
            epochs: 8,
            batch_size: 8,
            seed: 42,
            loss_kind: LossKind::Logistic,
            target: TargetKind::Presence,
        }
    }
}

impl TrainConfig {
    /// A learning rate of zero is accepted and freezes the model entirely.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} must be >= 0", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be >= 1".into()));
        }
        Ok(())
    }

    pub fn frozen(&self) -> bool {
        self.learning_rate == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training loss over the epoch's clips.
    pub loss: f64,
    /// Fraction of clips with `(output > 0) == (target > 0.5)`; presence only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    /// Mean absolute error; regression only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    pub clips: usize,
}

/// Trains on in-memory `(clip, target)` pairs. `on_epoch` sees each epoch's
/// metrics as soon as they are available.
pub fn train_samples(
    spec: &ModelSpec,
    weights: &Weights<f32>,
    samples: &[(VideoClip, f64)],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(Weights<f32>, Vec<EpochMetrics>)> {
    config.validate()?;
    weights.check(spec)?;
    if samples.is_empty() {
        return Err(Error::Validation("no training samples".into()));
    }
    let mut w = weights.clone();
    let mut velocity = Weights::zeros_like(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sgd = SgdParams {
        learning_rate: config.learning_rate,
        momentum: config.momentum,
    };
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut abs_err = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = Batch::new(
                chunk.iter().map(|&i| samples[i].0.clone()).collect(),
                chunk.iter().map(|&i| samples[i].1).collect(),
            )?;
            let out = backward(spec, &w, &batch, config.loss_kind)?;
            loss_sum += out.loss * chunk.len() as f64;
            for (&z, &y) in out.outputs.iter().zip(batch.targets()) {
                correct += usize::from((z > 0.0) == (y > 0.5));
                abs_err += (z - y).abs();
            }
            if !out.loss.is_finite() {
                return Err(Error::Validation(format!("training diverged at epoch {epoch}")));
            }
            if !config.frozen() {
                (w, velocity) = sgd_step(spec, &w, &out.grads, &velocity, sgd)?;
                update_running_stats(spec, &mut w, &out.batch_stats, BN_KEEP);
            }
        }
        let n = samples.len() as f64;
        let m = EpochMetrics {
            epoch,
            loss: loss_sum / n,
            accuracy: (config.target == TargetKind::Presence).then_some(correct as f64 / n),
            mae: (config.target == TargetKind::Contraction).then_some(abs_err / n),
            clips: samples.len(),
        };
        tracing::info!(epoch, loss = m.loss, accuracy = ?m.accuracy, mae = ?m.mae, "epoch done");
        on_epoch(&m);
        history.push(m);
    }
    Ok((w, history))
}

/// Loads the `split` clips of a manifest paired with their targets.
pub fn load_samples(manifest: &Manifest, split: Split, target: TargetKind) -> Result<Vec<(VideoClip, f64)>> {
    let entries: Vec<&ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| e.split == split && target.target(e).is_some())
        .collect();
    Ok(manifest
        .load(entries)?
        .into_iter()
        .map(|(e, c)| {
            let y = target.target(e).unwrap_or_default();
            (c, y)
        })
        .collect())
}

/// Trains on the manifest's training split.
pub fn train(
    spec: &ModelSpec,
    weights: &Weights<f32>,
    manifest: &Manifest,
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(Weights<f32>, Vec<EpochMetrics>)> {
    let samples = load_samples(manifest, Split::Train, config.target)?;
    train_samples(spec, weights, &samples, config, on_epoch)
}
