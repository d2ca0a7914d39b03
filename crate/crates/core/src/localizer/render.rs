use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::VideoClip;

use super::{Annotation, LocalizationResult};

/// Blend weight of the annotation colour.
pub const DISC_ALPHA: f32 = 0.5;
pub const DISC_COLOR: [u8; 3] = [0, 255, 0];

/// An 8-bit RGB frame, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl RgbFrame {
    pub fn from_gray(gray: &[f32], height: usize, width: usize) -> Self {
        let data = gray.iter().flat_map(|&v| [to_u8(v); 3]).collect();
        Self { height, width, data }
    }

    pub fn pixel(&self, h: usize, w: usize) -> [u8; 3] {
        let i = 3 * (h * self.width + w);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Alpha-blends `color` onto one pixel.
    pub fn blend(&mut self, h: usize, w: usize, color: [f32; 3], alpha: f32) {
        let i = 3 * (h * self.width + w);
        for (k, &c) in color.iter().enumerate() {
            let base = self.data[i + k] as f32;
            self.data[i + k] = (base * (1.0 - alpha) + c * alpha).round().clamp(0.0, 255.0) as u8;
        }
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_ppm()).map_err(|e| Error::io(path, e))
    }
}

pub fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Lattice points `(h, w)` of an `height x width` frame within the disc.
pub fn disc_pixels(a: &Annotation, height: usize, width: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    let r2 = a.radius * a.radius;
    let h0 = (a.center_h - a.radius).floor().max(0.0) as usize;
    let h1 = ((a.center_h + a.radius).ceil().max(-1.0) + 1.0).min(height as f64) as usize;
    let w0 = (a.center_w - a.radius).floor().max(0.0) as usize;
    let w1 = ((a.center_w + a.radius).ceil().max(-1.0) + 1.0).min(width as f64) as usize;
    (h0..h1)
        .flat_map(move |h| (w0..w1).map(move |w| (h, w)))
        .filter(move |&(h, w)| (h as f64 - a.center_h).powi(2) + (w as f64 - a.center_w).powi(2) <= r2)
}

/// Grayscale frames as RGB with the annotation disc blended in when located.
pub fn annotate(clip: &VideoClip, result: &LocalizationResult) -> Vec<RgbFrame> {
    let [t, h, w] = clip.dims();
    (0..t)
        .map(|i| {
            let mut f = RgbFrame::from_gray(clip.frame(i), h, w);
            if let Some(a) = &result.annotation {
                let color = DISC_COLOR.map(f32::from);
                for (r, c) in disc_pixels(a, h, w) {
                    f.blend(r, c, color, DISC_ALPHA);
                }
            }
            f
        })
        .collect()
}
