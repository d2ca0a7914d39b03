//! Presence accuracy, localization hit-rate and the candidate-count sweep.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::localizer::{localize_saliency, saliency, LocalizationStatus, LocalizerConfig, SaliencyOutput};
use crate::model::{ModelSpec, Weights};
use crate::phantom::{mean_visible_centroid, GroundTruthFrame, Label, Manifest, Split};
use crate::tensor::VideoClip;

/// A clip with the ground truth needed for scoring.
#[derive(Debug, Clone)]
pub struct EvalSample {
    pub name: String,
    pub label: Label,
    pub gt: Vec<GroundTruthFrame>,
    pub clip: VideoClip,
}

/// Loads the clips of one split (or all when `None`).
pub fn load_eval_samples(manifest: &Manifest, split: Option<Split>) -> Result<Vec<EvalSample>> {
    let entries = manifest.entries.iter().filter(|e| split.is_none_or(|s| e.split == s));
    Ok(manifest
        .load(entries)?
        .into_iter()
        .map(|(e, clip)| EvalSample {
            name: e.path.clone(),
            label: e.label,
            gt: e.gt.clone(),
            clip,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn add(&mut self, actual: bool, predicted: bool) {
        match (actual, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipResult {
    pub name: String,
    pub label: Label,
    pub logit: f64,
    pub present: bool,
    pub status: LocalizationStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gt_center: Option<[f64; 2]>,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub clips: usize,
    pub accuracy: f64,
    pub confusion: Confusion,
    /// Positives the model called present.
    pub true_positives: usize,
    pub located: usize,
    pub hits: usize,
    /// `hits / true_positives`.
    pub hit_rate: f64,
    /// `hits / positives`, counting gated positives as misses.
    pub hit_rate_all_positives: f64,
    pub per_clip: Vec<ClipResult>,
}

/// True when the annotation centre lies within `radius` of the mean
/// ground-truth centroid.
pub fn is_hit(center: [f64; 2], gt: [f64; 2], radius: f64) -> bool {
    (center[0] - gt[0]).hypot(center[1] - gt[1]) <= radius
}

fn score(samples: &[EvalSample], saliencies: &[SaliencyOutput], config: &LocalizerConfig) -> Result<EvalReport> {
    let mut confusion = Confusion::default();
    let mut per_clip = Vec::with_capacity(samples.len());
    let (mut located, mut hits, mut positives) = (0, 0, 0);
    for (s, sal) in samples.iter().zip(saliencies) {
        let r = localize_saliency(sal, &s.clip, config)?;
        let actual = s.label.has_vessel();
        confusion.add(actual, r.prediction.present);
        positives += usize::from(actual);
        let gt_center = mean_visible_centroid(&s.gt);
        let center = r.annotation.map(|a| [a.center_h, a.center_w]);
        let hit = match (actual, center, gt_center) {
            (true, Some(c), Some(g)) => is_hit(c, g, config.annotation_radius(s.clip.height())),
            _ => false,
        };
        if actual && r.status == LocalizationStatus::Located {
            located += 1;
        }
        hits += usize::from(hit);
        per_clip.push(ClipResult {
            name: s.name.clone(),
            label: s.label,
            logit: r.prediction.logit,
            present: r.prediction.present,
            status: r.status,
            center,
            gt_center,
            hit,
        });
    }
    Ok(EvalReport {
        clips: samples.len(),
        accuracy: confusion.accuracy(),
        confusion,
        true_positives: confusion.tp,
        located,
        hits,
        hit_rate: ratio(hits, confusion.tp),
        hit_rate_all_positives: ratio(hits, positives),
        per_clip,
    })
}

fn saliencies(spec: &ModelSpec, weights: &Weights<f32>, samples: &[EvalSample], tap: &str) -> Result<Vec<SaliencyOutput>> {
    samples.iter().map(|s| saliency(spec, weights, &s.clip, tap)).collect()
}

/// Runs the decision model and localizer over `samples`.
pub fn evaluate(spec: &ModelSpec, weights: &Weights<f32>, samples: &[EvalSample], config: &LocalizerConfig) -> Result<EvalReport> {
    config.validate()?;
    let sal = saliencies(spec, weights, samples, &config.tap_name)?;
    score(samples, &sal, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub hit_rate: f64,
    pub hits: usize,
    pub true_positives: usize,
}

/// Hit-rate for each candidate count; one forward pass per clip.
pub fn sweep_n(
    spec: &ModelSpec,
    weights: &Weights<f32>,
    samples: &[EvalSample],
    base: &LocalizerConfig,
    ns: &[usize],
) -> Result<Vec<SweepRow>> {
    base.validate()?;
    let sal = saliencies(spec, weights, samples, &base.tap_name)?;
    ns.iter()
        .map(|&n| {
            let cfg = LocalizerConfig {
                n_candidates: n,
                ..base.clone()
            };
            let r = score(samples, &sal, &cfg)?;
            Ok(SweepRow {
                n,
                hit_rate: r.hit_rate,
                hits: r.hits,
                true_positives: r.true_positives,
            })
        })
        .collect()
}

/// The row with the highest hit-rate; the smallest `n` wins ties.
pub fn best_row(rows: &[SweepRow]) -> Option<&SweepRow> {
    rows.iter()
        .fold(None, |best: Option<&SweepRow>, r| match best {
            Some(b) if b.hit_rate >= r.hit_rate => Some(b),
            _ => Some(r),
        })
}
