//! Monte Carlo permutation Shapley values over a piece grid, with black
//! (zero) as the masking value.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localizer::RgbFrame;
use crate::model::{forward, ModelSpec, Weights};
use crate::tensor::{Real, VideoClip};

pub const DEFAULT_GRID: usize = 4;
pub const DEFAULT_ITERATIONS: usize = 51_200;
/// Blend weight of a piece whose `|phi|` equals the maximum.
pub const HEATMAP_ALPHA: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapConfig {
    pub grid_h: usize,
    pub grid_w: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for ShapConfig {
    fn default() -> Self {
        Self {
            grid_h: DEFAULT_GRID,
            grid_w: DEFAULT_GRID,
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
        }
    }
}

/// Tiling of every frame into `grid_h x grid_w` rectangles. The last row and
/// column of pieces absorb any remainder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceGrid {
    pub grid_h: usize,
    pub grid_w: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

/// Pixel rectangle `[h0, h1) x [w0, w1)` of one piece in frame `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PieceRect {
    pub t: usize,
    pub h0: usize,
    pub h1: usize,
    pub w0: usize,
    pub w1: usize,
}

fn span(i: usize, cells: usize, n: usize) -> (usize, usize) {
    let base = n / cells;
    let start = i * base;
    let end = if i + 1 == cells { n } else { start + base };
    (start, end)
}

impl PieceGrid {
    pub fn new(dims: [usize; 3], grid_h: usize, grid_w: usize) -> Result<Self> {
        let [frames, height, width] = dims;
        if grid_h == 0 || grid_w == 0 {
            return Err(Error::Config("piece grid must be at least 1x1".into()));
        }
        if grid_h > height || grid_w > width {
            return Err(Error::Config(format!(
                "piece grid {grid_h}x{grid_w} larger than frame {height}x{width}"
            )));
        }
        Ok(Self {
            grid_h,
            grid_w,
            frames,
            height,
            width,
        })
    }

    pub fn cells_per_frame(&self) -> usize {
        self.grid_h * self.grid_w
    }

    pub fn piece_count(&self) -> usize {
        self.frames * self.cells_per_frame()
    }

    pub fn rect(&self, piece: usize) -> PieceRect {
        let t = piece / self.cells_per_frame();
        let cell = piece % self.cells_per_frame();
        let (h0, h1) = span(cell / self.grid_w, self.grid_h, self.height);
        let (w0, w1) = span(cell % self.grid_w, self.grid_w, self.width);
        PieceRect { t, h0, h1, w0, w1 }
    }

    /// Spatial cell (row-major within a frame) containing pixel `(h, w)`.
    pub fn cell_at(&self, h: usize, w: usize) -> usize {
        let locate = |x: usize, cells: usize, n: usize| (x / (n / cells)).min(cells - 1);
        locate(h, self.grid_h, self.height) * self.grid_w + locate(w, self.grid_w, self.width)
    }

    pub fn piece_at(&self, t: usize, h: usize, w: usize) -> usize {
        t * self.cells_per_frame() + self.cell_at(h, w)
    }
}

pub fn partition_clip(clip: &VideoClip, grid_h: usize, grid_w: usize) -> Result<PieceGrid> {
    PieceGrid::new(clip.dims(), grid_h, grid_w)
}

fn copy_piece(dst: &mut [f32], src: Option<&[f32]>, grid: &PieceGrid, piece: usize) {
    let r = grid.rect(piece);
    let (h, w) = (grid.height, grid.width);
    for row in r.h0..r.h1 {
        let at = r.t * h * w + row * w;
        let line = &mut dst[at + r.w0..at + r.w1];
        match src {
            Some(s) => line.copy_from_slice(&s[at + r.w0..at + r.w1]),
            None => line.fill(0.0),
        }
    }
}

/// Copy of `clip` with the listed pieces set to zero.
pub fn apply_mask(clip: &VideoClip, grid: &PieceGrid, blacked: &[usize]) -> Result<VideoClip> {
    if clip.dims() != [grid.frames, grid.height, grid.width] {
        return Err(Error::Validation("clip does not match piece grid".into()));
    }
    let mut data = clip.data().to_vec();
    for &p in blacked {
        if p >= grid.piece_count() {
            return Err(Error::Validation(format!("piece {p} out of range")));
        }
        copy_piece(&mut data, None, grid, p);
    }
    VideoClip::from_frames(clip.dims(), data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub phi: Vec<f64>,
    /// Model evaluations spent in sweeps (`sweeps * piece_count`).
    pub iterations_used: usize,
    pub sweeps: usize,
    pub baseline_value: f64,
    pub full_value: f64,
}

impl Attribution {
    pub fn efficiency_gap(&self) -> f64 {
        (self.phi.iter().sum::<f64>() - (self.full_value - self.baseline_value)).abs()
    }

    /// `phi` summed over frames for each spatial cell.
    pub fn spatial(&self, grid: &PieceGrid) -> Vec<f64> {
        let cells = grid.cells_per_frame();
        let mut out = vec![0.0; cells];
        for (p, v) in self.phi.iter().enumerate() {
            out[p % cells] += v;
        }
        out
    }
}

/// Permutation-sweep estimator over an arbitrary value function.
///
/// Each sweep starts from the fully black clip and reveals pieces in a
/// seeded random order, crediting each piece with the change in value.
pub fn estimate_shapley_with(
    clip: &VideoClip,
    grid: &PieceGrid,
    iterations: usize,
    seed: u64,
    mut value: impl FnMut(&VideoClip) -> Result<f64>,
) -> Result<Attribution> {
    let pieces = grid.piece_count();
    if clip.dims() != [grid.frames, grid.height, grid.width] {
        return Err(Error::Validation("clip does not match piece grid".into()));
    }
    if iterations < pieces {
        return Err(Error::Config(format!(
            "{iterations} iterations cannot cover one sweep of {pieces} pieces"
        )));
    }
    let sweeps = iterations / pieces;
    let dims = clip.dims();
    let black = VideoClip::zeros(dims);
    let baseline_value = value(&black)?;
    let full_value = value(clip)?;
    let mut phi = vec![0.0; pieces];
    let mut order: Vec<usize> = (0..pieces).collect();
    for sweep in 0..sweeps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(sweep as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut data = vec![0f32; clip.data().len()];
        let mut prev = baseline_value;
        for &p in &order {
            copy_piece(&mut data, Some(clip.data()), grid, p);
            let v = value(&VideoClip::from_frames(dims, data.clone())?)?;
            phi[p] += v - prev;
            prev = v;
        }
    }
    for v in &mut phi {
        *v /= sweeps as f64;
    }
    Ok(Attribution {
        phi,
        iterations_used: sweeps * pieces,
        sweeps,
        baseline_value,
        full_value,
    })
}

/// Shapley values of the model output (logit or regression value).
pub fn estimate_shapley<T: Real>(
    spec: &ModelSpec,
    weights: &Weights<T>,
    clip: &VideoClip,
    grid: &PieceGrid,
    iterations: usize,
    seed: u64,
) -> Result<Attribution> {
    estimate_shapley_with(clip, grid, iterations, seed, |c| {
        Ok(forward(spec, weights, c, None)?.value.as_f64())
    })
}

/// Tint strength per piece: `|phi| / max |phi|` (all zero when phi is zero).
pub fn tint_intensities(attr: &Attribution) -> Vec<f64> {
    let max = attr.phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return vec![0.0; attr.phi.len()];
    }
    attr.phi.iter().map(|v| v.abs() / max).collect()
}

/// Frames with each piece tinted red (positive phi) or blue (negative).
pub fn render_heatmap(clip: &VideoClip, attr: &Attribution, grid: &PieceGrid) -> Result<Vec<RgbFrame>> {
    if attr.phi.len() != grid.piece_count() {
        return Err(Error::dim("phi", grid.piece_count(), attr.phi.len()));
    }
    let [t, h, w] = clip.dims();
    let mut frames: Vec<RgbFrame> = (0..t).map(|i| RgbFrame::from_gray(clip.frame(i), h, w)).collect();
    for (p, &k) in tint_intensities(attr).iter().enumerate() {
        if k == 0.0 {
            continue;
        }
        let color = if attr.phi[p] > 0.0 { [255.0, 0.0, 0.0] } else { [0.0, 0.0, 255.0] };
        let r = grid.rect(p);
        for row in r.h0..r.h1 {
            for col in r.w0..r.w1 {
                frames[r.t].blend(row, col, color, (HEATMAP_ALPHA * k) as f32);
            }
        }
    }
    Ok(frames)
}
