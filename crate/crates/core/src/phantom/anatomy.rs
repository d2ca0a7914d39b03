//! A steerable torso plane for the interactive simulator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor::VideoClip;

use super::clip::{GroundTruthFrame, Label, PhantomGroundTruth, DEFAULT_SPECKLE};
use super::mask::MaskShape;
use super::render::{render_frame, Blob, TissueTexture, VesselFrame};

pub const WORLD_SIZE: usize = 256;
/// Largest probe rotation either way, radians.
pub const MAX_THETA: f64 = std::f64::consts::PI / 6.0;
const N_DISTRACTORS: usize = 6;
const PULSE_CONTRACTION: f64 = 0.15;
const PULSE_PERIOD: f64 = 8.0;

/// Probe position in world pixels (`x` = column, `y` = row) and rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Torso extent: poses live in `[0, width] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorsoBounds {
    pub width: f64,
    pub height: f64,
    pub max_theta: f64,
}

impl TorsoBounds {
    pub fn clamp(&self, p: ProbePose) -> ProbePose {
        let fix = |v: f64, lo: f64, hi: f64| if v.is_finite() { v.clamp(lo, hi) } else { lo.max(0.0).min(hi) };
        ProbePose {
            x: fix(p.x, 0.0, self.width),
            y: fix(p.y, 0.0, self.height),
            theta: fix(p.theta, -self.max_theta, self.max_theta),
        }
    }

    pub fn center(&self) -> ProbePose {
        ProbePose {
            x: self.width / 2.0,
            y: self.height / 2.0,
            theta: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldVessel {
    /// World `[row, col]`.
    pub center: [f64; 2],
    pub angle: f64,
    pub half_length: f64,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct AnatomyMap {
    pub seed: u64,
    pub bounds: TorsoBounds,
    pub dims: [usize; 3],
    pub mask_shape: MaskShape,
    pub vessel: WorldVessel,
    pub distractors: Vec<Blob>,
    texture: TissueTexture,
}

impl AnatomyMap {
    pub fn generate(seed: u64, dims: [usize; 3], mask_shape: MaskShape) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = WORLD_SIZE as f64;
        let scale = dims[1].min(dims[2]) as f64 / 64.0;
        let radius = rng.random_range(4.5..6.0) * scale;
        let vessel = WorldVessel {
            center: [rng.random_range(0.3 * size..0.7 * size), rng.random_range(0.3 * size..0.7 * size)],
            angle: rng.random_range(-30f64..30.0).to_radians(),
            half_length: radius * rng.random_range(2.3..2.8),
            radius,
        };
        let mut distractors = Vec::new();
        while distractors.len() < N_DISTRACTORS {
            let c = [rng.random_range(16.0..size - 16.0), rng.random_range(16.0..size - 16.0)];
            let r = rng.random_range(3.0..6.0) * scale;
            let d = ((c[0] - vessel.center[0]).powi(2) + (c[1] - vessel.center[1]).powi(2)).sqrt();
            if d > vessel.half_length + r + 24.0 {
                distractors.push(Blob { center: c, radius: r });
            }
        }
        rng.set_stream(1);
        let texture = TissueTexture::generate(WORLD_SIZE, WORLD_SIZE, DEFAULT_SPECKLE, &mut rng);
        Self {
            seed,
            bounds: TorsoBounds {
                width: size,
                height: size,
                max_theta: MAX_THETA,
            },
            dims,
            mask_shape,
            vessel,
            distractors,
            texture,
        }
    }

    /// Pose that puts the vessel centre at the middle of the frame.
    pub fn pose_on_vessel(&self) -> ProbePose {
        ProbePose {
            x: self.vessel.center[1],
            y: self.vessel.center[0],
            theta: 0.0,
        }
    }

    fn screen_center(&self) -> [f64; 2] {
        [(self.dims[1] as f64 - 1.0) / 2.0, (self.dims[2] as f64 - 1.0) / 2.0]
    }

    /// Screen `[row, col]` to world `[row, col]`.
    pub fn screen_to_world(&self, pose: &ProbePose, p: [f64; 2]) -> [f64; 2] {
        let c = self.screen_center();
        let (s, co) = pose.theta.sin_cos();
        let (dr, dc) = (p[0] - c[0], p[1] - c[1]);
        [pose.y + dr * co + dc * s, pose.x - dr * s + dc * co]
    }

    /// World `[row, col]` to screen `[row, col]`.
    pub fn world_to_screen(&self, pose: &ProbePose, p: [f64; 2]) -> [f64; 2] {
        let c = self.screen_center();
        let (s, co) = pose.theta.sin_cos();
        let (dy, dx) = (p[0] - pose.y, p[1] - pose.x);
        [c[0] + dy * co - dx * s, c[1] + dy * s + dx * co]
    }

    fn sample_texture(&self, p: [f64; 2]) -> f32 {
        let max = (WORLD_SIZE - 1) as f64;
        let (y, x) = (p[0].clamp(0.0, max), p[1].clamp(0.0, max));
        let (y0, x0) = (y.floor(), x.floor());
        let (fy, fx) = ((y - y0) as f32, (x - x0) as f32);
        let (y1, x1) = ((y0 + 1.0).min(max), (x0 + 1.0).min(max));
        let t = &self.texture;
        let a = t.sample(y0, x0) * (1.0 - fx) + t.sample(y0, x1) * fx;
        let b = t.sample(y1, x0) * (1.0 - fx) + t.sample(y1, x1) * fx;
        a * (1.0 - fy) + b * fy
    }
}

/// Renders the probe's view at `pose`; `frame_clock` is the absolute index
/// of the first frame and drives pulsation and noise.
pub fn render_at_pose(anatomy: &AnatomyMap, pose: ProbePose, frame_clock: u64) -> Result<(VideoClip, PhantomGroundTruth)> {
    let pose = anatomy.bounds.clamp(pose);
    let [t, h, w] = anatomy.dims;
    let mask = anatomy.mask_shape.raster(h, w);
    let world: Vec<[f64; 2]> = (0..h * w)
        .map(|i| anatomy.screen_to_world(&pose, [(i / w) as f64, (i % w) as f64]))
        .collect();
    let tissue_cache: Vec<f32> = world.iter().map(|&p| anatomy.sample_texture(p)).collect();
    let tissue = |r: usize, c: usize| tissue_cache[r * w + c];
    let v = &anatomy.vessel;
    let center = anatomy.world_to_screen(&pose, v.center);
    let angle = v.angle - pose.theta;
    let blobs: Vec<Blob> = anatomy
        .distractors
        .iter()
        .map(|b| Blob {
            center: anatomy.world_to_screen(&pose, b.center),
            radius: b.radius,
        })
        .collect();
    let visible = anatomy.mask_shape.contains(h, w, center[0], center[1]);
    let mut rng = ChaCha8Rng::seed_from_u64(anatomy.seed);
    rng.set_stream(frame_clock.wrapping_add(2));
    let mut data = vec![0f32; t * h * w];
    let mut frames = Vec::with_capacity(t);
    for (i, out) in data.chunks_exact_mut(h * w).enumerate() {
        let clock = (frame_clock + i as u64) as f64;
        let dip = 0.5 * (1.0 + (std::f64::consts::TAU * clock / PULSE_PERIOD).cos());
        let radius = v.radius * (1.0 - PULSE_CONTRACTION * dip);
        let vf = VesselFrame {
            center,
            angle,
            half_length: v.half_length,
            radius,
        };
        render_frame(out, h, w, &mask, &tissue, Some(&vf), &blobs, &mut rng);
        frames.push(GroundTruthFrame {
            h: center[0],
            w: center[1],
            r: radius,
            visible,
        });
    }
    let clip = VideoClip::from_frames(anatomy.dims, data)?;
    let label = if visible { Label::IvcNoSniff } else { Label::NoIvc };
    Ok((
        clip,
        PhantomGroundTruth {
            frames,
            label,
            contraction_fraction: if visible { PULSE_CONTRACTION } else { 0.0 },
        },
    ))
}
