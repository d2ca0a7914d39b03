//! Gate on the decision logit, then turn a tapped feature map into one
//! spatial annotation.

mod render;
mod select;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{forward, ModelSpec, Prediction, Weights};
use crate::tensor::{channel_l2_norm, spline_resize3d, Real, SaliencyVolume, VideoClip};

pub use render::{annotate, disc_pixels, to_u8, RgbFrame, DISC_ALPHA, DISC_COLOR};
pub use select::{filter_black, filter_outliers, select_top_n, Candidate, CandidateSet};

pub const DEFAULT_TAP: &str = "stage3";
pub const DEFAULT_N: usize = 400;
/// Distances are given at this reference frame height and scaled to the clip.
pub const REFERENCE_HEIGHT: f64 = 224.0;
pub const REFERENCE_OUTLIER_PX: f64 = 40.0;
pub const REFERENCE_RADIUS_PX: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizerConfig {
    pub tap_name: String,
    pub n_candidates: usize,
    /// Absolute override; `None` scales 40 px at height 224 to the clip.
    pub outlier_dist_px: Option<f64>,
    /// Absolute override; `None` scales 20 px at height 224 to the clip.
    pub annotation_radius_px: Option<f64>,
    pub black_eps: f64,
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        Self {
            tap_name: DEFAULT_TAP.into(),
            n_candidates: DEFAULT_N,
            outlier_dist_px: None,
            annotation_radius_px: None,
            black_eps: 0.0,
        }
    }
}

impl LocalizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_candidates == 0 {
            return Err(Error::Config("n_candidates must be >= 1".into()));
        }
        for (name, v) in [("outlier_dist_px", self.outlier_dist_px), ("annotation_radius_px", self.annotation_radius_px)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{name} must be > 0, got {v}")));
                }
            }
        }
        if !(self.black_eps >= 0.0) {
            return Err(Error::Config(format!("black_eps must be >= 0, got {}", self.black_eps)));
        }
        Ok(())
    }

    pub fn outlier_dist(&self, clip_height: usize) -> f64 {
        self.outlier_dist_px
            .unwrap_or(REFERENCE_OUTLIER_PX * clip_height as f64 / REFERENCE_HEIGHT)
    }

    pub fn annotation_radius(&self, clip_height: usize) -> f64 {
        self.annotation_radius_px
            .unwrap_or(REFERENCE_RADIUS_PX * clip_height as f64 / REFERENCE_HEIGHT)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalizationStatus {
    Located,
    GatedNegative,
    EmptyAfterFiltering,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub center_h: f64,
    pub center_w: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub prediction: Prediction,
    pub annotation: Option<Annotation>,
    pub survivors: CandidateSet,
    pub status: LocalizationStatus,
}

impl LocalizationResult {
    pub fn gated(prediction: Prediction) -> Self {
        Self {
            prediction,
            annotation: None,
            survivors: CandidateSet::default(),
            status: LocalizationStatus::GatedNegative,
        }
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            logit: self.prediction.logit,
            status: self.status,
            center: self.annotation.map(|a| [a.center_h, a.center_w]),
            radius: self.annotation.map(|a| a.radius),
            n_survivors: self.survivors.len(),
        }
    }
}

/// JSON written next to annotated frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub logit: f64,
    pub status: LocalizationStatus,
    pub center: Option<[f64; 2]>,
    pub radius: Option<f64>,
    pub n_survivors: usize,
}

/// Decision plus, when positive, the clip-aligned saliency volume.
#[derive(Debug, Clone)]
pub struct SaliencyOutput {
    pub prediction: Prediction,
    pub saliency: Option<SaliencyVolume<f32>>,
}

/// Forward pass with the tap; the saliency volume is only computed for a
/// positive decision.
pub fn saliency<T: Real>(spec: &ModelSpec, weights: &Weights<T>, clip: &VideoClip, tap: &str) -> Result<SaliencyOutput> {
    let out = forward(spec, weights, clip, Some(tap))?;
    let prediction = out.prediction();
    if !prediction.present {
        return Ok(SaliencyOutput { prediction, saliency: None });
    }
    let fm = out
        .feature_map
        .ok_or_else(|| Error::UnknownTap(tap.to_owned()))?;
    let norm = channel_l2_norm(&fm);
    let resized = spline_resize3d(&norm, clip.dims());
    let cast = resized.volume().cast::<f32>();
    Ok(SaliencyOutput {
        prediction,
        saliency: Some(SaliencyVolume::new(cast)?),
    })
}

/// Candidate selection and filtering on a precomputed saliency volume.
pub fn localize_saliency(out: &SaliencyOutput, clip: &VideoClip, config: &LocalizerConfig) -> Result<LocalizationResult> {
    config.validate()?;
    let (true, Some(sal)) = (out.prediction.present, out.saliency.as_ref()) else {
        return Ok(LocalizationResult::gated(out.prediction));
    };
    if sal.dims() != clip.dims() {
        let axis = ["t", "h", "w"];
        let k = (0..3).find(|&k| sal.dims()[k] != clip.dims()[k]).unwrap_or(0);
        return Err(Error::dim(format!("saliency.{}", axis[k]), clip.dims()[k], sal.dims()[k]));
    }
    let h = clip.height();
    let top = select_top_n(sal, config.n_candidates);
    let lit = filter_black(&top, clip, config.black_eps);
    let survivors = filter_outliers(&lit, config.outlier_dist(h));
    let (annotation, status) = match survivors.mean_spatial() {
        Some([ch, cw]) => (
            Some(Annotation {
                center_h: ch,
                center_w: cw,
                radius: config.annotation_radius(h),
            }),
            LocalizationStatus::Located,
        ),
        None => (None, LocalizationStatus::EmptyAfterFiltering),
    };
    Ok(LocalizationResult {
        prediction: out.prediction,
        annotation,
        survivors,
        status,
    })
}

/// The full pipeline for one clip.
pub fn localize<T: Real>(
    spec: &ModelSpec,
    weights: &Weights<T>,
    clip: &VideoClip,
    config: &LocalizerConfig,
) -> Result<LocalizationResult> {
    config.validate()?;
    let out = saliency(spec, weights, clip, &config.tap_name)?;
    localize_saliency(&out, clip, config)
}
