//! Separable Catmull-Rom resampling of single-channel volumes.
//!
//! Output sample `i` sits at source coordinate `i * n_in / n_out`, clamped to
//! `[0, n_in - 1]`. Under integer upsampling by `s`, source sample `o` lands
//! exactly on output `s * o`, which is where a chain of stride-2, pad-1
//! convolutions centres its output `o`. Samples beyond either end of the
//! source are replaced by linear extrapolation of the last two, so constant
//! and linear fields are reproduced everywhere inside the clamp.

use super::{Real, SaliencyVolume, Volume};

/// One output sample as a weighted sum of source samples.
#[derive(Debug, Clone)]
struct Tap<T> {
    idx: [usize; 4],
    weight: [T; 4],
}

fn catmull_rom_weights(u: f64) -> [f64; 4] {
    let u2 = u * u;
    let u3 = u2 * u;
    [
        0.5 * (-u + 2.0 * u2 - u3),
        0.5 * (2.0 - 5.0 * u2 + 3.0 * u3),
        0.5 * (u + 4.0 * u2 - 3.0 * u3),
        0.5 * (-u2 + u3),
    ]
}

/// Source coordinate of output sample `i`, clamped to the source lattice.
pub fn source_coordinate(i: usize, n_in: usize, n_out: usize) -> f64 {
    let x = i as f64 * n_in as f64 / n_out as f64;
    x.clamp(0.0, (n_in - 1) as f64)
}

fn plan<T: Real>(n_in: usize, n_out: usize) -> Vec<Tap<T>> {
    (0..n_out)
        .map(|i| {
            if n_in == 1 {
                return Tap {
                    idx: [0; 4],
                    weight: [T::zero(), T::one(), T::zero(), T::zero()],
                };
            }
            let x = source_coordinate(i, n_in, n_out);
            let i0 = (x.floor() as usize).min(n_in - 2);
            let u = x - i0 as f64;
            let w = catmull_rom_weights(u);
            // Positions i0-1 .. i0+2, with out-of-range neighbours folded in
            // as linear extrapolations.
            let mut acc = vec![0.0f64; n_in];
            let mut add = |pos: isize, weight: f64| {
                if pos < 0 {
                    acc[0] += 2.0 * weight;
                    acc[1] -= weight;
                } else if pos as usize >= n_in {
                    acc[n_in - 1] += 2.0 * weight;
                    acc[n_in - 2] -= weight;
                } else {
                    acc[pos as usize] += weight;
                }
            };
            for (k, &wk) in w.iter().enumerate() {
                add(i0 as isize - 1 + k as isize, wk);
            }
            let lo = i0.saturating_sub(1);
            let mut idx = [lo; 4];
            let mut weight = [T::zero(); 4];
            for (slot, j) in (lo..(i0 + 3).min(n_in)).enumerate() {
                idx[slot] = j;
                weight[slot] = T::lit(acc[j]);
            }
            Tap { idx, weight }
        })
        .collect()
}

fn resample_axis<T: Real>(src: &Volume<T>, axis: usize, n_out: usize) -> Volume<T> {
    let shape = src.shape();
    let n_in = shape[axis + 1];
    if n_in == n_out {
        return src.clone();
    }
    let taps = plan::<T>(n_in, n_out);
    let mut out_shape = shape;
    out_shape[axis + 1] = n_out;
    let mut out = Volume::zeros(out_shape);
    // Treat the volume as (outer, n, inner) around the resampled axis.
    let outer: usize = shape[..axis + 1].iter().product();
    let inner: usize = shape[axis + 2..].iter().product();
    let s = src.data();
    let d = out.data_mut();
    for o in 0..outer {
        for (i, tap) in taps.iter().enumerate() {
            let dst = &mut d[(o * n_out + i) * inner..][..inner];
            for (&j, &wj) in tap.idx.iter().zip(&tap.weight) {
                if wj == T::zero() {
                    continue;
                }
                let row = &s[(o * n_in + j) * inner..][..inner];
                for (a, &b) in dst.iter_mut().zip(row) {
                    *a += wj * b;
                }
            }
        }
    }
    out
}

/// Resizes a saliency volume to `target = (t, h, w)`.
///
/// Exact when `target` equals the source dims; negative overshoot is clamped
/// to zero.
pub fn spline_resize3d<T: Real>(v: &SaliencyVolume<T>, target: [usize; 3]) -> SaliencyVolume<T> {
    assert!(target.iter().all(|&n| n >= 1), "resize target must be non-empty");
    if v.dims() == target {
        return v.clone();
    }
    let mut cur = v.volume().clone();
    for axis in [2, 1, 0] {
        cur = resample_axis(&cur, axis, target[axis]);
    }
    for x in cur.data_mut() {
        if !(*x > T::zero()) {
            *x = T::zero();
        }
    }
    SaliencyVolume::new_unchecked(cur)
}
