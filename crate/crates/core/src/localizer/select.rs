use serde::{Deserialize, Serialize};

use crate::tensor::{Real, SaliencyVolume, VideoClip};

/// One spatiotemporal saliency pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub t: usize,
    pub h: usize,
    pub w: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub entries: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Mean `(h, w)` over all entries, ignoring time.
    pub fn mean_spatial(&self) -> Option<[f64; 2]> {
        if self.entries.is_empty() {
            return None;
        }
        let n = self.entries.len() as f64;
        let (sh, sw) = self
            .entries
            .iter()
            .fold((0.0, 0.0), |(a, b), c| (a + c.h as f64, b + c.w as f64));
        Some([sh / n, sw / n])
    }
}

/// The `n` largest voxels of `s`; equal values are ordered by ascending
/// `(t, h, w)`. Returns every voxel when the volume holds fewer than `n`.
pub fn select_top_n<T: Real>(s: &SaliencyVolume<T>, n: usize) -> CandidateSet {
    let data = s.data();
    let mut idx: Vec<usize> = (0..data.len()).collect();
    let order = |&a: &usize, &b: &usize| data[b].partial_cmp(&data[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b));
    let n = n.min(idx.len());
    if n == 0 {
        return CandidateSet::default();
    }
    if n < idx.len() {
        idx.select_nth_unstable_by(n - 1, order);
        idx.truncate(n);
    }
    idx.sort_unstable_by(order);
    let [_, h, w] = s.dims();
    CandidateSet {
        entries: idx
            .into_iter()
            .map(|i| Candidate {
                t: i / (h * w),
                h: (i / w) % h,
                w: i % w,
                value: data[i].as_f64(),
            })
            .collect(),
    }
}

/// Drops candidates whose spatial location is `<= black_eps` in every frame.
pub fn filter_black(s: &CandidateSet, clip: &VideoClip, black_eps: f64) -> CandidateSet {
    let eps = black_eps as f32;
    let black = |h: usize, w: usize| (0..clip.frames()).all(|t| clip.at(t, h, w) <= eps);
    CandidateSet {
        entries: s.entries.iter().copied().filter(|c| !black(c.h, c.w)).collect(),
    }
}

/// Drops candidates more than `max_dist_px` from the mean spatial position.
/// Applied once; the mean is not recomputed in between.
pub fn filter_outliers(s: &CandidateSet, max_dist_px: f64) -> CandidateSet {
    let Some([mh, mw]) = s.mean_spatial() else {
        return CandidateSet::default();
    };
    CandidateSet {
        entries: s
            .entries
            .iter()
            .copied()
            .filter(|c| (c.h as f64 - mh).hypot(c.w as f64 - mw) <= max_dist_px)
            .collect(),
    }
}
