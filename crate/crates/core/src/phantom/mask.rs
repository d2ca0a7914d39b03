use serde::{Deserialize, Serialize};

/// Shape of the imaging region; everything outside is exactly black.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskShape {
    /// Circular sector, apex at top centre, 70 degree aperture.
    #[default]
    Fan,
    /// Whole frame minus a 4 pixel border.
    Rect,
}

pub const FAN_APERTURE_DEG: f64 = 70.0;
pub const RECT_BORDER: usize = 4;

impl MaskShape {
    pub fn contains(self, h: usize, w: usize, row: f64, col: f64) -> bool {
        match self {
            MaskShape::Fan => {
                let apex_col = (w as f64 - 1.0) / 2.0;
                let dy = row;
                let dx = col - apex_col;
                if dy < 0.0 {
                    return false;
                }
                let r = (dx * dx + dy * dy).sqrt();
                r <= h as f64 - 1.0 && dx.abs() <= dy * (FAN_APERTURE_DEG / 2.0).to_radians().tan()
            }
            MaskShape::Rect => {
                let b = RECT_BORDER as f64;
                row >= b && row <= (h - RECT_BORDER - 1) as f64 && col >= b && col <= (w - RECT_BORDER - 1) as f64
            }
        }
    }

    /// Row-major inside/outside flags for an `h x w` frame.
    pub fn raster(self, h: usize, w: usize) -> Vec<bool> {
        (0..h)
            .flat_map(|r| (0..w).map(move |c| (r, c)))
            .map(|(r, c)| self.contains(h, w, r as f64, c as f64))
            .collect()
    }

    /// True when every point within `margin` of `(row, col)` (sampled on a
    /// ring) is inside.
    pub fn contains_disc(self, h: usize, w: usize, row: f64, col: f64, margin: f64) -> bool {
        if !self.contains(h, w, row, col) {
            return false;
        }
        (0..16).all(|k| {
            let a = k as f64 * std::f64::consts::TAU / 16.0;
            self.contains(h, w, row + margin * a.sin(), col + margin * a.cos())
        })
    }
}
