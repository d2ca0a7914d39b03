use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::VideoClip;

use super::mask::MaskShape;
use super::render::{render_frame, Blob, TissueTexture, VesselFrame};

/// Raw three-way annotation of a clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NoIvc,
    IvcNoSniff,
    IvcSniff,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::NoIvc, Label::IvcNoSniff, Label::IvcSniff];

    /// Binary presence target: both vessel classes are positive.
    pub fn presence(self) -> f64 {
        match self {
            Label::NoIvc => 0.0,
            _ => 1.0,
        }
    }

    pub fn has_vessel(self) -> bool {
        self != Label::NoIvc
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::NoIvc => "no_ivc",
            Label::IvcNoSniff => "ivc_no_sniff",
            Label::IvcSniff => "ivc_sniff",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Smallest allowed vessel radius in pixels.
pub const MIN_VESSEL_RADIUS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VesselParams {
    /// Centre `[row, col]` for every frame.
    pub path: Vec<[f64; 2]>,
    pub base_radius: f64,
    /// Peak relative shrink of the minor radius.
    pub contraction_fraction: f64,
    pub sniff: bool,
    /// Long-axis orientation in radians from the column axis.
    pub angle: f64,
    /// Semi-major axis as a multiple of `base_radius`.
    pub elongation: f64,
    /// Frame at which the radius is smallest.
    pub event_frame: f64,
    /// Pulsation period in frames (non-sniff vessels).
    pub period: f64,
}

/// Width (in frames) of the sniff dip on either side of `event_frame`.
fn sniff_half_width(frames: usize) -> f64 {
    (frames as f64 / 4.0).max(2.0)
}

impl VesselParams {
    /// Analytic minor radius at frame `t`.
    pub fn radius_at(&self, t: f64, frames: usize) -> f64 {
        let dip = if self.sniff {
            let hw = sniff_half_width(frames);
            let d = (t - self.event_frame).abs();
            if d < hw {
                0.5 * (1.0 + (std::f64::consts::PI * d / hw).cos())
            } else {
                0.0
            }
        } else {
            0.5 * (1.0 + (std::f64::consts::TAU * (t - self.event_frame) / self.period).cos())
        };
        self.base_radius * (1.0 - self.contraction_fraction * dip)
    }

    pub fn half_length(&self) -> f64 {
        self.base_radius * self.elongation
    }

    pub fn frame(&self, t: usize, frames: usize) -> VesselFrame {
        VesselFrame {
            center: self.path[t],
            angle: self.angle,
            half_length: self.half_length(),
            radius: self.radius_at(t as f64, frames),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomParams {
    pub dims: [usize; 3],
    #[serde(default)]
    pub mask_shape: MaskShape,
    pub speckle_strength: f64,
    pub vessel: Option<VesselParams>,
    pub n_distractors: usize,
    pub seed: u64,
}

pub const DEFAULT_SPECKLE: f64 = 0.5;

/// One frame of ground truth, in the manifest's field names.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFrame {
    pub h: f64,
    pub w: f64,
    pub r: f64,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomGroundTruth {
    pub frames: Vec<GroundTruthFrame>,
    pub label: Label,
    pub contraction_fraction: f64,
}

impl PhantomGroundTruth {
    /// Mean centroid `[h, w]` over visible frames.
    pub fn mean_centroid(&self) -> Option<[f64; 2]> {
        mean_visible_centroid(&self.frames)
    }

    pub fn any_visible(&self) -> bool {
        self.frames.iter().any(|f| f.visible)
    }
}

pub fn mean_visible_centroid(frames: &[GroundTruthFrame]) -> Option<[f64; 2]> {
    let vis: Vec<_> = frames.iter().filter(|f| f.visible).collect();
    if vis.is_empty() {
        return None;
    }
    let n = vis.len() as f64;
    Some([
        vis.iter().map(|f| f.h).sum::<f64>() / n,
        vis.iter().map(|f| f.w).sum::<f64>() / n,
    ])
}

impl PhantomParams {
    pub fn validate(&self) -> Result<()> {
        let [t, h, w] = self.dims;
        if t == 0 || h < 16 || w < 16 {
            return Err(Error::Config(format!("phantom dims {:?} too small (need t>=1, h,w>=16)", self.dims)));
        }
        if !(0.0..=1.0).contains(&self.speckle_strength) {
            return Err(Error::Config(format!("speckle_strength {} outside [0, 1]", self.speckle_strength)));
        }
        if let Some(v) = &self.vessel {
            if v.path.len() != t {
                return Err(Error::Config(format!("vessel path has {} points for {t} frames", v.path.len())));
            }
            if !(0.0..=1.0).contains(&v.contraction_fraction) {
                return Err(Error::Config(format!(
                    "contraction_fraction {} outside [0, 1]",
                    v.contraction_fraction
                )));
            }
            if v.elongation < 1.0 || v.period <= 0.0 {
                return Err(Error::Config("vessel elongation must be >= 1 and period > 0".into()));
            }
            for i in 0..t {
                let r = v.radius_at(i as f64, t);
                if r < MIN_VESSEL_RADIUS {
                    return Err(Error::Generation(format!(
                        "vessel radius {r:.2}px at frame {i} below {MIN_VESSEL_RADIUS}px"
                    )));
                }
                let [pr, pc] = v.path[i];
                if !self.mask_shape.contains_disc(h, w, pr, pc, v.base_radius) {
                    return Err(Error::Generation(format!(
                        "vessel path leaves the {:?} mask at frame {i} ({pr:.1}, {pc:.1})",
                        self.mask_shape
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn label(&self) -> Label {
        match &self.vessel {
            None => Label::NoIvc,
            Some(v) if v.sniff => Label::IvcSniff,
            Some(_) => Label::IvcNoSniff,
        }
    }

    /// Draws randomized parameters for a clip of the given class.
    pub fn sample(label: Label, dims: [usize; 3], mask_shape: MaskShape, speckle_strength: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let [t, h, w] = dims;
        let scale = h.min(w) as f64 / 64.0;
        let vessel = if label.has_vessel() {
            let sniff = label == Label::IvcSniff;
            let base_radius = (rng.random_range(4.5..6.5) * scale).max(3.4);
            let elongation = rng.random_range(2.0..2.8);
            let angle = rng.random_range(-35f64..35.0).to_radians();
            let contraction_fraction = if sniff {
                let deepest = (1.0 - (MIN_VESSEL_RADIUS + 0.2) / base_radius).min(0.75);
                rng.random_range(0.35..deepest.max(0.36))
            } else {
                rng.random_range(0.08..0.2)
            };
            let event_frame = if sniff {
                rng.random_range(t / 4..=(3 * t / 4).max(t / 4)) as f64
            } else {
                rng.random_range(0.0..t as f64)
            };
            let period = rng.random_range(6.0..10.0);
            let drift_mag = rng.random_range(0.0..2.0) * scale;
            let drift_dir = rng.random_range(0.0..std::f64::consts::TAU);
            let drift = [drift_mag * drift_dir.sin(), drift_mag * drift_dir.cos()];
            let fits = |c: [f64; 2]| ellipse_inside(mask_shape, h, w, c, angle, base_radius * elongation + 2.0, base_radius + 2.0);
            let mut start = None;
            for _ in 0..1000 {
                let c = [rng.random_range(0.0..h as f64), rng.random_range(0.0..w as f64)];
                if fits(c) && fits([c[0] + drift[0], c[1] + drift[1]]) {
                    start = Some(c);
                    break;
                }
            }
            let start = start.ok_or_else(|| Error::Generation("no room for the vessel inside the mask".into()))?;
            let denom = (t.max(2) - 1) as f64;
            let path = (0..t)
                .map(|i| {
                    let f = i as f64 / denom;
                    [start[0] + f * drift[0], start[1] + f * drift[1]]
                })
                .collect();
            Some(VesselParams {
                path,
                base_radius,
                contraction_fraction,
                sniff,
                angle,
                elongation,
                event_frame,
                period,
            })
        } else {
            None
        };
        let n_distractors = if label.has_vessel() {
            rng.random_range(0..=2)
        } else {
            rng.random_range(1..=3)
        };
        Ok(Self {
            dims,
            mask_shape,
            speckle_strength,
            vessel,
            n_distractors,
            seed,
        })
    }
}

/// True when an ellipse (semi-axes `a` along `angle`, `b` across) lies
/// inside the mask, checked on its boundary.
fn ellipse_inside(mask: MaskShape, h: usize, w: usize, c: [f64; 2], angle: f64, a: f64, b: f64) -> bool {
    let (s, co) = angle.sin_cos();
    (0..48).all(|k| {
        let (sp, cp) = (k as f64 * std::f64::consts::TAU / 48.0).sin_cos();
        let (u, v) = (a * cp, b * sp);
        mask.contains(h, w, c[0] + u * s + v * co, c[1] + u * co - v * s)
    })
}

/// Places non-pulsating dark blobs inside the mask, clear of the vessel.
fn place_distractors(params: &PhantomParams, rng: &mut ChaCha8Rng) -> Vec<Blob> {
    let [_, h, w] = params.dims;
    let scale = h.min(w) as f64 / 64.0;
    let mut blobs = Vec::with_capacity(params.n_distractors);
    for _ in 0..params.n_distractors {
        let radius = rng.random_range(3.0..6.0) * scale;
        for _ in 0..200 {
            let c = [rng.random_range(0.0..h as f64), rng.random_range(0.0..w as f64)];
            if !params.mask_shape.contains_disc(h, w, c[0], c[1], radius + 1.0) {
                continue;
            }
            let clear_vessel = params.vessel.as_ref().is_none_or(|v| {
                v.path.iter().all(|p| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt() > v.half_length() + radius + 4.0)
            });
            let clear_blobs = blobs
                .iter()
                .all(|b: &Blob| ((b.center[0] - c[0]).powi(2) + (b.center[1] - c[1]).powi(2)).sqrt() > b.radius + radius + 2.0);
            if clear_vessel && clear_blobs {
                blobs.push(Blob { center: c, radius });
                break;
            }
        }
    }
    blobs
}

/// Renders a clip and its ground truth. Deterministic per `params`.
pub fn generate_clip(params: &PhantomParams) -> Result<(VideoClip, PhantomGroundTruth)> {
    params.validate()?;
    let [t, h, w] = params.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(2);
    let texture = TissueTexture::generate(h, w, params.speckle_strength, &mut rng);
    let blobs = place_distractors(params, &mut rng);
    let mask = params.mask_shape.raster(h, w);
    let tissue = |r: usize, c: usize| texture.data[r * w + c];
    let mut data = vec![0f32; t * h * w];
    let mut frames = Vec::with_capacity(t);
    for (i, out) in data.chunks_exact_mut(h * w).enumerate() {
        let vf = params.vessel.as_ref().map(|v| v.frame(i, t));
        render_frame(out, h, w, &mask, &tissue, vf.as_ref(), &blobs, &mut rng);
        frames.push(match vf {
            Some(v) => GroundTruthFrame {
                h: v.center[0],
                w: v.center[1],
                r: v.radius,
                visible: params.mask_shape.contains(h, w, v.center[0], v.center[1]),
            },
            None => GroundTruthFrame {
                h: 0.0,
                w: 0.0,
                r: 0.0,
                visible: false,
            },
        });
    }
    let clip = VideoClip::from_frames(params.dims, data)?;
    let gt = PhantomGroundTruth {
        frames,
        label: params.label(),
        contraction_fraction: params.vessel.as_ref().map_or(0.0, |v| v.contraction_fraction),
    };
    Ok((clip, gt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sniff_minimum_radius() {
        let mut p = PhantomParams::sample(Label::IvcSniff, [16, 64, 64], MaskShape::Fan, DEFAULT_SPECKLE, 3).unwrap();
        p.vessel.as_mut().unwrap().contraction_fraction = 0.6;
        let base = p.vessel.as_ref().unwrap().base_radius;
        let (_, gt) = generate_clip(&p).unwrap();
        let min = gt.frames.iter().map(|f| f.r).fold(f64::INFINITY, f64::min);
        assert!((min - 0.4 * base).abs() <= 1.0, "min {min} base {base}");
    }

    #[test]
    fn path_outside_mask_is_generation_error() {
        let mut p = PhantomParams::sample(Label::IvcNoSniff, [8, 64, 64], MaskShape::Fan, DEFAULT_SPECKLE, 5).unwrap();
        p.vessel.as_mut().unwrap().path[3] = [2.0, 2.0];
        assert!(matches!(generate_clip(&p), Err(Error::Generation(_))));
    }

    #[test]
    fn label_from_params() {
        for label in Label::ALL {
            let p = PhantomParams::sample(label, [8, 64, 64], MaskShape::Rect, 0.3, 9).unwrap();
            assert_eq!(p.label(), label);
        }
    }
}
