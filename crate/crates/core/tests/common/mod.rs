//! Brute-force oracles and fixtures shared by the integration tests and the
//! acceptance suite.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ivcnav::localizer::Candidate;
use ivcnav::model::{residual_net_spec, ModelSpec, Weights};
use ivcnav::shap::{estimate_shapley_with, partition_clip, PieceGrid};
use ivcnav::tensor::{
    batchnorm_infer, conv3d_forward, linear_forward, pool3d, source_coordinate, spline_resize3d, BatchNormParams,
    ConvGeometry, PoolMode, SaliencyVolume, VideoClip, Volume,
};
use ivcnav::train::{grad_check, Batch, GradCheckReport, LossKind};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_volume(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> Volume<f64> {
    Volume::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_clip(rng: &mut ChaCha8Rng, dims: [usize; 3]) -> VideoClip {
    let n = dims.iter().product();
    VideoClip::from_frames(dims, (0..n).map(|_| rng.random_range(0.0f32..1.0)).collect()).unwrap()
}

/// `max |a - b| / max(max |b|, 1e-300)`.
pub fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Direct six-fold loop over output positions and kernel taps.
pub fn conv_oracle(x: &Volume<f64>, wt: &[f64], bias: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let [cin, t, h, w] = x.shape();
    let [kt, kh, kw] = g.kernel;
    let out: Vec<usize> = (0..3)
        .map(|a| ([t, h, w][a] + 2 * g.padding[a] - g.kernel[a]) / g.stride[a] + 1)
        .collect();
    let mut y = Vec::new();
    for o in 0..g.out_ch {
        for ot in 0..out[0] {
            for oh in 0..out[1] {
                for ow in 0..out[2] {
                    let mut acc = if bias.is_empty() { 0.0 } else { bias[o] };
                    for c in 0..cin {
                        for dt in 0..kt {
                            for dh in 0..kh {
                                for dw in 0..kw {
                                    let it = (ot * g.stride[0] + dt) as isize - g.padding[0] as isize;
                                    let ih = (oh * g.stride[1] + dh) as isize - g.padding[1] as isize;
                                    let iw = (ow * g.stride[2] + dw) as isize - g.padding[2] as isize;
                                    if it < 0 || ih < 0 || iw < 0 || it >= t as isize || ih >= h as isize || iw >= w as isize {
                                        continue;
                                    }
                                    let wi = (((o * cin + c) * kt + dt) * kh + dh) * kw + dw;
                                    acc += wt[wi] * x.get([c, it as usize, ih as usize, iw as usize]);
                                }
                            }
                        }
                    }
                    y.push(acc);
                }
            }
        }
    }
    y
}

pub fn pool_oracle(x: &Volume<f64>, mode: PoolMode, win: [usize; 3], stride: [usize; 3]) -> Vec<f64> {
    let [c, t, h, w] = x.shape();
    let mut y = Vec::new();
    for ch in 0..c {
        for ot in 0..(t - win[0]) / stride[0] + 1 {
            for oh in 0..(h - win[1]) / stride[1] + 1 {
                for ow in 0..(w - win[2]) / stride[2] + 1 {
                    let mut vals = Vec::new();
                    for dt in 0..win[0] {
                        for dh in 0..win[1] {
                            for dw in 0..win[2] {
                                vals.push(x.get([ch, ot * stride[0] + dt, oh * stride[1] + dh, ow * stride[2] + dw]));
                            }
                        }
                    }
                    y.push(match mode {
                        PoolMode::Max => vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                        PoolMode::Average => vals.iter().sum::<f64>() / vals.len() as f64,
                    });
                }
            }
        }
    }
    y
}

pub fn bn_oracle(x: &Volume<f64>, mean: &[f64], var: &[f64], gamma: &[f64], beta: &[f64], eps: f64) -> Vec<f64> {
    let [c, t, h, w] = x.shape();
    let mut y = Vec::new();
    for ch in 0..c {
        for i in 0..t * h * w {
            let v = x.channel(ch)[i];
            y.push(gamma[ch] * (v - mean[ch]) / (var[ch] + eps).sqrt() + beta[ch]);
        }
    }
    y
}

pub fn dot_oracle(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    b.iter()
        .enumerate()
        .map(|(o, &bias)| bias + (0..x.len()).map(|i| w[o * x.len() + i] * x[i]).sum::<f64>())
        .collect()
}

#[derive(Debug, Default, Clone, Copy)]
pub struct KernelSuite {
    pub cases: usize,
    pub conv: f64,
    pub pool: f64,
    pub bn: f64,
    pub linear: f64,
}

impl KernelSuite {
    pub fn worst(&self) -> f64 {
        self.conv.max(self.pool).max(self.bn).max(self.linear)
    }
}

/// Random conv/pool/bn/linear cases against the oracles above, in `f64`.
pub fn kernel_suite(seed: u64, cases_per_kernel: usize) -> KernelSuite {
    let mut r = rng(seed);
    let mut s = KernelSuite::default();
    for _ in 0..cases_per_kernel {
        let cin = r.random_range(1..=3);
        let cout = r.random_range(1..=4);
        let k = [r.random_range(1..=3), r.random_range(1..=3), r.random_range(1..=3)];
        let stride = [r.random_range(1..=2), r.random_range(1..=2), r.random_range(1..=2)];
        let pad = [r.random_range(0..=1), r.random_range(0..=1), r.random_range(0..=1)];
        let dims = [r.random_range(3..=6), r.random_range(3..=7), r.random_range(3..=7)];
        let g = ConvGeometry {
            in_ch: cin,
            out_ch: cout,
            kernel: k,
            stride,
            padding: pad,
        };
        let x = random_volume(&mut r, [cin, dims[0], dims[1], dims[2]]);
        let wt = random_vec(&mut r, g.weight_len());
        let bias = if r.random_bool(0.5) { random_vec(&mut r, cout) } else { vec![] };
        let y = conv3d_forward(&x, &wt, &bias, &g).unwrap();
        s.conv = s.conv.max(rel_inf(y.data(), &conv_oracle(&x, &wt, &bias, &g)));

        let c = r.random_range(1..=3);
        let x = random_volume(&mut r, [c, dims[0], dims[1], dims[2]]);
        let win = [r.random_range(1..=3), r.random_range(1..=3), r.random_range(1..=3)];
        let mode = if r.random_bool(0.5) { PoolMode::Max } else { PoolMode::Average };
        let y = pool3d(&x, mode, win, stride).unwrap();
        s.pool = s.pool.max(rel_inf(y.data(), &pool_oracle(&x, mode, win, stride)));

        let mean = random_vec(&mut r, c);
        let var: Vec<f64> = (0..c).map(|_| r.random_range(0.05..2.0)).collect();
        let gamma = random_vec(&mut r, c);
        let beta = random_vec(&mut r, c);
        let eps = 1e-5;
        let p = BatchNormParams {
            mean: &mean,
            var: &var,
            gamma: &gamma,
            beta: &beta,
            eps,
        };
        let y = batchnorm_infer(&x, p).unwrap();
        s.bn = s.bn.max(rel_inf(y.data(), &bn_oracle(&x, &mean, &var, &gamma, &beta, eps)));

        let n_in = r.random_range(1..=12);
        let n_out = r.random_range(1..=4);
        let xv = random_vec(&mut r, n_in);
        let wv = random_vec(&mut r, n_in * n_out);
        let bv = random_vec(&mut r, n_out);
        let y = linear_forward(&xv, &wv, &bv).unwrap();
        s.linear = s.linear.max(rel_inf(&y, &dot_oracle(&xv, &wv, &bv)));
        s.cases += 4;
    }
    s
}

/// Residual net with one stage per entry of `widths`, biases and batch-norm
/// shifts randomised so no gradient vanishes by symmetry.
pub fn gradcheck_model(blocks: usize, seed: u64) -> (ModelSpec, Weights<f64>, Batch) {
    let dims = [2, 4, 4];
    let spec = residual_net_spec("gradcheck", dims, &vec![2; blocks]).unwrap();
    let mut w = Weights::<f32>::he_init(&spec, seed).cast::<f64>();
    let mut r = rng(seed ^ 0x5eed);
    for (d, b) in spec.param_decls().iter().zip(w.blocks.iter_mut()) {
        if d.name.ends_with(".beta") || d.name.ends_with(".bias") {
            b.data.iter_mut().for_each(|x| *x = r.random_range(-0.3..0.3));
        }
    }
    let clips = vec![random_clip(&mut r, dims), random_clip(&mut r, dims)];
    let batch = Batch::new(clips, vec![1.0, 0.0]).unwrap();
    (spec, w, batch)
}

pub fn gradcheck_blocks(blocks: usize, seed: u64) -> GradCheckReport {
    let (spec, w, batch) = gradcheck_model(blocks, seed);
    grad_check(&spec, &w, &batch, LossKind::Logistic, 1e-4, seed).unwrap()
}

/// Cubic Hermite segment with central-difference tangents on a sequence
/// padded by linear extrapolation; evaluated at `x` in source units.
pub fn catmull_rom_1d(p: &[f64], x: f64) -> f64 {
    let n = p.len();
    if n == 1 {
        return p[0];
    }
    let at = |i: isize| -> f64 {
        if i < 0 {
            2.0 * p[0] - p[1]
        } else if i as usize >= n {
            2.0 * p[n - 1] - p[n - 2]
        } else {
            p[i as usize]
        }
    };
    let i0 = (x.floor() as isize).min(n as isize - 2);
    let u = x - i0 as f64;
    let (a, b) = (at(i0), at(i0 + 1));
    let ta = 0.5 * (at(i0 + 1) - at(i0 - 1));
    let tb = 0.5 * (at(i0 + 2) - at(i0));
    let (u2, u3) = (u * u, u * u * u);
    (2.0 * u3 - 3.0 * u2 + 1.0) * a + (u3 - 2.0 * u2 + u) * ta + (-2.0 * u3 + 3.0 * u2) * b + (u3 - u2) * tb
}

fn grid_coord(i: usize, n_in: usize, n_out: usize) -> f64 {
    (i as f64 * n_in as f64 / n_out as f64).min((n_in - 1) as f64)
}

/// Separable oracle: resample w, then h, then t with [`catmull_rom_1d`],
/// clamping the final result at 0.
pub fn spline_oracle(v: &Volume<f64>, target: [usize; 3]) -> Vec<f64> {
    let [_, t, h, w] = v.shape();
    let [tt, th, tw] = target;
    let src = |a: usize, b: usize, c: usize| v.get([0, a, b, c]);
    let mut s1 = vec![0.0; t * h * tw];
    for a in 0..t {
        for b in 0..h {
            let row: Vec<f64> = (0..w).map(|c| src(a, b, c)).collect();
            for c in 0..tw {
                s1[(a * h + b) * tw + c] = catmull_rom_1d(&row, grid_coord(c, w, tw));
            }
        }
    }
    let mut s2 = vec![0.0; t * th * tw];
    for a in 0..t {
        for c in 0..tw {
            let col: Vec<f64> = (0..h).map(|b| s1[(a * h + b) * tw + c]).collect();
            for b in 0..th {
                s2[(a * th + b) * tw + c] = catmull_rom_1d(&col, grid_coord(b, h, th));
            }
        }
    }
    let mut s3 = vec![0.0; tt * th * tw];
    for b in 0..th {
        for c in 0..tw {
            let line: Vec<f64> = (0..t).map(|a| s2[(a * th + b) * tw + c]).collect();
            for a in 0..tt {
                s3[(a * th + b) * tw + c] = catmull_rom_1d(&line, grid_coord(a, t, tt)).max(0.0);
            }
        }
    }
    s3
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SplineSuite {
    pub cases: usize,
    /// Cases where an identity resize was not bit-equal.
    pub lattice_mismatches: usize,
    pub linear_err: f64,
    pub oracle_err: f64,
}

/// Identity resizes, linear-field reproduction and the separable oracle on
/// `cases` seeded random volumes.
pub fn spline_suite(seed: u64, cases: usize) -> SplineSuite {
    let mut r = rng(seed);
    let mut s = SplineSuite {
        cases,
        ..Default::default()
    };
    for _ in 0..cases {
        let dims = [r.random_range(1..=5), r.random_range(2..=6), r.random_range(2..=6)];
        let v = Volume::from_fn([1, dims[0], dims[1], dims[2]], |_| r.random_range(0.0..1.0));
        let sv = SaliencyVolume::new(v.clone()).unwrap();
        if spline_resize3d(&sv, dims).volume().data() != v.data() {
            s.lattice_mismatches += 1;
        }

        // Positive affine field; the 0-clamp must never engage.
        let c0 = r.random_range(20.0..21.0);
        let g = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let field = |x: [f64; 3]| c0 + g[0] * x[0] + g[1] * x[1] + g[2] * x[2];
        let lin = Volume::from_fn([1, dims[0], dims[1], dims[2]], |[_, a, b, c]| field([a as f64, b as f64, c as f64]));
        let target = [
            dims[0] * r.random_range(1..=3),
            dims[1] * r.random_range(1..=3),
            dims[2] * r.random_range(1..=3),
        ];
        let out = spline_resize3d(&SaliencyVolume::new(lin).unwrap(), target);
        for a in 0..target[0] {
            for b in 0..target[1] {
                for c in 0..target[2] {
                    let x = [
                        source_coordinate(a, dims[0], target[0]),
                        source_coordinate(b, dims[1], target[1]),
                        source_coordinate(c, dims[2], target[2]),
                    ];
                    let got = out.volume().get([0, a, b, c]);
                    s.linear_err = s.linear_err.max((got - field(x)).abs());
                }
            }
        }

        let target = [r.random_range(1..=9), r.random_range(1..=9), r.random_range(1..=9)];
        let out = spline_resize3d(&sv, target);
        s.oracle_err = s.oracle_err.max(rel_inf(out.volume().data(), &spline_oracle(&v, target)));
    }
    s
}

/// Mean of one piece's pixels.
pub fn piece_mean(clip: &VideoClip, grid: &PieceGrid, p: usize) -> f64 {
    let r = grid.rect(p);
    let [_, h, w] = clip.dims();
    let mut sum = 0.0;
    let mut n = 0usize;
    for hh in r.h0..r.h1 {
        for ww in r.w0..r.w1 {
            sum += clip.data()[(r.t * h + hh) * w + ww] as f64;
            n += 1;
        }
    }
    sum / n as f64
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ShapSuite {
    pub runs: usize,
    pub efficiency_gap: f64,
    pub additive_err: f64,
    pub dummy_abs: f64,
    pub symmetry_err: f64,
}

/// Additive, dummy and symmetric value functions over random clips.
pub fn shap_suite(seed: u64, runs: usize) -> ShapSuite {
    let mut r = rng(seed);
    let mut s = ShapSuite {
        runs,
        ..Default::default()
    };
    for run in 0..runs {
        let dims = [r.random_range(1..=3), r.random_range(4..=10), r.random_range(4..=10)];
        let clip = random_clip(&mut r, dims);
        let grid = partition_clip(&clip, r.random_range(1..=3), r.random_range(1..=3)).unwrap();
        let pieces = grid.piece_count();
        let coef = random_vec(&mut r, pieces);
        let additive = |c: &VideoClip| -> ivcnav::Result<f64> {
            Ok((0..pieces).map(|p| coef[p] * piece_mean(c, &grid, p)).sum())
        };
        let a = estimate_shapley_with(&clip, &grid, pieces, run as u64, additive).unwrap();
        s.efficiency_gap = s.efficiency_gap.max(a.efficiency_gap());
        for p in 0..pieces {
            let expect = coef[p] * piece_mean(&clip, &grid, p);
            s.additive_err = s.additive_err.max((a.phi[p] - expect).abs());
        }

        // Interaction model that ignores piece 0 entirely.
        let nonlinear = |c: &VideoClip| -> ivcnav::Result<f64> {
            let m: Vec<f64> = (0..pieces).map(|p| piece_mean(c, &grid, p)).collect();
            let rest: f64 = m[1..].iter().zip(&coef[1..]).map(|(x, k)| x * k).sum();
            Ok(rest.tanh() + m[1..].iter().product::<f64>())
        };
        let sweeps = r.random_range(1..=4);
        let a = estimate_shapley_with(&clip, &grid, sweeps * pieces, run as u64, nonlinear).unwrap();
        s.efficiency_gap = s.efficiency_gap.max(a.efficiency_gap());
        s.dummy_abs = s.dummy_abs.max(a.phi[0].abs());

        // Symmetry: two pieces with equal content and equal coefficients in
        // an additive model.
        if pieces >= 2 {
            let (x, y) = (0, pieces - 1);
            let mut data = clip.data().to_vec();
            let fill = r.random_range(0.2f32..0.8);
            for rect in [grid.rect(x), grid.rect(y)] {
                for hh in rect.h0..rect.h1 {
                    for ww in rect.w0..rect.w1 {
                        data[(rect.t * dims[1] + hh) * dims[2] + ww] = fill;
                    }
                }
            }
            let sym = VideoClip::from_frames(dims, data).unwrap();
            let mut k = coef.clone();
            k[y] = k[x];
            let f = |c: &VideoClip| -> ivcnav::Result<f64> { Ok((0..pieces).map(|p| k[p] * piece_mean(c, &grid, p)).sum()) };
            let a = estimate_shapley_with(&sym, &grid, sweeps * pieces, run as u64, f).unwrap();
            s.efficiency_gap = s.efficiency_gap.max(a.efficiency_gap());
            s.symmetry_err = s.symmetry_err.max((a.phi[x] - a.phi[y]).abs());
        }
    }
    s
}

/// Spatial centre of a candidate list, for readable assertions.
pub fn centre(c: &[Candidate]) -> (f64, f64) {
    let n = c.len() as f64;
    (c.iter().map(|x| x.h as f64).sum::<f64>() / n, c.iter().map(|x| x.w as f64).sum::<f64>() / n)
}
