//! Shared rasterizer for phantom clips and the anatomy world.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Darkest value inside the mask; zero is reserved for outside the mask.
pub const INSIDE_FLOOR: f32 = 1.0 / 255.0;
/// Lumen intensity relative to surrounding tissue.
const LUMEN_LEVEL: f64 = 0.1;
/// Additive brightness of the echogenic vessel wall.
const WALL_GAIN: f64 = 0.35;
const WALL_SIGMA: f64 = 0.9;
const WALL_OFFSET: f64 = 0.9;
/// Relative intensity inside a distractor blob.
const DISTRACTOR_LEVEL: f64 = 0.3;
/// Per-frame multiplicative noise.
const FRAME_NOISE: f64 = 0.05;

/// Static echogenicity times speckle on a regular grid.
#[derive(Debug, Clone)]
pub struct TissueTexture {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl TissueTexture {
    pub fn generate(h: usize, w: usize, speckle_strength: f64, rng: &mut ChaCha8Rng) -> Self {
        // Coarse echogenicity lattice, bilinearly upsampled.
        let (gh, gw) = (h / 12 + 2, w / 12 + 2);
        let coarse: Vec<f64> = (0..gh * gw).map(|_| rng.random_range(0.42..0.68)).collect();
        let echo = |r: usize, c: usize| {
            let y = r as f64 / h.max(2) as f64 * (gh - 1) as f64;
            let x = c as f64 / w.max(2) as f64 * (gw - 1) as f64;
            let (y0, x0) = (y.floor() as usize, x.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(gh - 1), (x0 + 1).min(gw - 1));
            let (fy, fx) = (y - y0 as f64, x - x0 as f64);
            let a = coarse[y0 * gw + x0] * (1.0 - fx) + coarse[y0 * gw + x1] * fx;
            let b = coarse[y1 * gw + x0] * (1.0 - fx) + coarse[y1 * gw + x1] * fx;
            a * (1.0 - fy) + b * fy
        };
        // Speckle: magnitude of a lightly blurred complex Gaussian field,
        // normalised to unit mean.
        let re: Vec<f64> = (0..h * w).map(|_| StandardNormal.sample(rng)).collect();
        let im: Vec<f64> = (0..h * w).map(|_| StandardNormal.sample(rng)).collect();
        let blur = |f: &[f64], r: usize, c: usize| {
            let mut s = 0.0;
            let mut n = 0.0;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let rr = r as i64 + dr;
                    let cc = c as i64 + dc;
                    if rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w {
                        let wt = if dr == 0 && dc == 0 { 2.0 } else { 1.0 };
                        s += wt * f[rr as usize * w + cc as usize];
                        n += wt;
                    }
                }
            }
            s / n
        };
        let mag: Vec<f64> = (0..h * w)
            .map(|i| {
                let (r, c) = (i / w, i % w);
                blur(&re, r, c).hypot(blur(&im, r, c))
            })
            .collect();
        let mean = mag.iter().sum::<f64>() / mag.len() as f64;
        let data = (0..h * w)
            .map(|i| {
                let s = mag[i] / mean;
                (echo(i / w, i % w) * (1.0 + speckle_strength * (s - 1.0))).max(0.0) as f32
            })
            .collect();
        Self { h, w, data }
    }

    /// Nearest-neighbour lookup with edge clamping.
    pub fn sample(&self, row: f64, col: f64) -> f32 {
        let r = (row.round().max(0.0) as usize).min(self.h - 1);
        let c = (col.round().max(0.0) as usize).min(self.w - 1);
        self.data[r * self.w + c]
    }
}

/// Vessel geometry for one frame, in screen pixels.
#[derive(Debug, Clone, Copy)]
pub struct VesselFrame {
    pub center: [f64; 2],
    /// Orientation of the long axis, radians from the +column axis.
    pub angle: f64,
    pub half_length: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Blob {
    pub center: [f64; 2],
    pub radius: f64,
}

fn smoothstep(edge0: f64, edge1: f64, x: f64) -> f64 {
    let t = ((x - edge0) / (edge1 - edge0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Approximate signed distance (pixels) to the ellipse boundary.
fn ellipse_sd(v: &VesselFrame, row: f64, col: f64) -> f64 {
    let (dy, dx) = (row - v.center[0], col - v.center[1]);
    let (s, c) = v.angle.sin_cos();
    let u = dx * c + dy * s;
    let w = -dx * s + dy * c;
    let (a, b) = (v.half_length, v.radius.max(0.5));
    let f = (u / a).powi(2) + (w / b).powi(2) - 1.0;
    let g = ((2.0 * u / (a * a)).powi(2) + (2.0 * w / (b * b)).powi(2)).sqrt();
    if g < 1e-9 {
        -b
    } else {
        (f / g).max(-b)
    }
}

/// Renders one frame into `out` (row-major `h x w`).
///
/// `tissue(row, col)` supplies static tissue brightness at a screen pixel.
#[allow(clippy::too_many_arguments)]
pub fn render_frame(
    out: &mut [f32],
    h: usize,
    w: usize,
    mask: &[bool],
    tissue: &dyn Fn(usize, usize) -> f32,
    vessel: Option<&VesselFrame>,
    blobs: &[Blob],
    rng: &mut ChaCha8Rng,
) {
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            // Noise is drawn for every pixel so the stream does not depend on the mask.
            let n: f64 = StandardNormal.sample(rng);
            if !mask[i] {
                out[i] = 0.0;
                continue;
            }
            let (row, col) = (r as f64, c as f64);
            let mut v = tissue(r, c) as f64 * (1.0 + FRAME_NOISE * n);
            for b in blobs {
                let d = ((row - b.center[0]).powi(2) + (col - b.center[1]).powi(2)).sqrt() - b.radius;
                let m = 1.0 - smoothstep(-1.0, 1.0, d);
                v *= 1.0 - m * (1.0 - DISTRACTOR_LEVEL);
            }
            if let Some(vf) = vessel {
                let sd = ellipse_sd(vf, row, col);
                let lumen = 1.0 - smoothstep(-0.8, 0.8, sd);
                let wall = (-(sd - WALL_OFFSET).powi(2) / (2.0 * WALL_SIGMA * WALL_SIGMA)).exp();
                v = v * (1.0 - lumen * (1.0 - LUMEN_LEVEL)) + WALL_GAIN * wall * (1.0 + FRAME_NOISE * n);
            }
            out[i] = (v as f32).clamp(INSIDE_FLOOR, 1.0);
        }
    }
}
