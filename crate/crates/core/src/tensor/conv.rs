//! 3-D cross-correlation with zero padding, lowered to a single GEMM per
//! call through an explicit im2col buffer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Real, Volume};

/// Static shape of a 3-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub in_ch: usize,
    pub out_ch: usize,
    /// `(kt, kh, kw)`.
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub padding: [usize; 3],
}

impl ConvGeometry {
    pub fn cubic(in_ch: usize, out_ch: usize, k: usize, stride: [usize; 3], pad: usize) -> Self {
        Self {
            in_ch,
            out_ch,
            kernel: [k; 3],
            stride,
            padding: [pad; 3],
        }
    }

    pub fn weight_shape(&self) -> [usize; 5] {
        [
            self.out_ch,
            self.in_ch,
            self.kernel[0],
            self.kernel[1],
            self.kernel[2],
        ]
    }

    pub fn weight_len(&self) -> usize {
        self.weight_shape().iter().product()
    }

    /// Rows of the im2col matrix.
    pub fn patch_len(&self) -> usize {
        self.in_ch * self.kernel.iter().product::<usize>()
    }

    /// Output `(t, h, w)` for an input of `dims`.
    pub fn output_dims(&self, dims: [usize; 3]) -> Result<[usize; 3]> {
        if self.stride.contains(&0) {
            return Err(Error::Config("convolution stride must be >= 1".into()));
        }
        let mut out = [0; 3];
        for (a, axis) in ["t", "h", "w"].iter().enumerate() {
            let padded = dims[a] + 2 * self.padding[a];
            if padded < self.kernel[a] || self.kernel[a] == 0 {
                return Err(Error::Config(format!(
                    "convolution output along {axis} would be empty (input {}, padding {}, kernel {})",
                    dims[a], self.padding[a], self.kernel[a]
                )));
            }
            out[a] = (padded - self.kernel[a]) / self.stride[a] + 1;
        }
        Ok(out)
    }

    fn is_pointwise_identity_layout(&self) -> bool {
        self.kernel == [1, 1, 1] && self.stride == [1, 1, 1] && self.padding == [0, 0, 0]
    }
}

/// Checks that `input` and `weight` agree with `geom` and returns output dims.
pub(crate) fn check_conv<T>(geom: &ConvGeometry, input: &Volume<T>, weight: &[T]) -> Result<[usize; 3]> {
    if input.channels() != geom.in_ch {
        return Err(Error::dim("in_channels", geom.in_ch, input.channels()));
    }
    if weight.len() != geom.weight_len() {
        return Err(Error::dim("kernel", geom.weight_len(), weight.len()));
    }
    geom.output_dims(input.dims())
}

/// Fills the `(patch_len x out_positions)` im2col matrix.
pub(crate) fn im2col<T: Real>(geom: &ConvGeometry, input: &Volume<T>, out: [usize; 3]) -> Vec<T> {
    let [it, ih, iw] = input.dims();
    let [ot, oh, ow] = out;
    let [kt, kh, kw] = geom.kernel;
    let [st, sh, sw] = geom.stride;
    let [pt, ph, pw] = geom.padding;
    let n = ot * oh * ow;
    let mut col = vec![T::zero(); geom.patch_len() * n];
    let src = input.data();
    let mut row = 0;
    for c in 0..geom.in_ch {
        let plane = &src[c * it * ih * iw..(c + 1) * it * ih * iw];
        for dt in 0..kt {
            for dh in 0..kh {
                for dw in 0..kw {
                    let dst = &mut col[row * n..(row + 1) * n];
                    row += 1;
                    for zt in 0..ot {
                        let ti = (zt * st + dt) as isize - pt as isize;
                        if ti < 0 || ti >= it as isize {
                            continue;
                        }
                        for zh in 0..oh {
                            let hi = (zh * sh + dh) as isize - ph as isize;
                            if hi < 0 || hi >= ih as isize {
                                continue;
                            }
                            let src_row = &plane[(ti as usize * ih + hi as usize) * iw..][..iw];
                            let dst_row = &mut dst[(zt * oh + zh) * ow..][..ow];
                            for (zw, d) in dst_row.iter_mut().enumerate() {
                                let wi = (zw * sw + dw) as isize - pw as isize;
                                if wi >= 0 && wi < iw as isize {
                                    *d = src_row[wi as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    col
}

/// Scatter-adds an im2col-shaped gradient back onto an input-shaped volume.
pub(crate) fn col2im<T: Real>(geom: &ConvGeometry, col: &[T], input_dims: [usize; 3], out: [usize; 3]) -> Volume<T> {
    let [it, ih, iw] = input_dims;
    let [ot, oh, ow] = out;
    let [kt, kh, kw] = geom.kernel;
    let [st, sh, sw] = geom.stride;
    let [pt, ph, pw] = geom.padding;
    let n = ot * oh * ow;
    let mut grad = Volume::zeros([geom.in_ch, it, ih, iw]);
    let dst_all = grad.data_mut();
    let mut row = 0;
    for c in 0..geom.in_ch {
        let plane = &mut dst_all[c * it * ih * iw..(c + 1) * it * ih * iw];
        for dt in 0..kt {
            for dh in 0..kh {
                for dw in 0..kw {
                    let src = &col[row * n..(row + 1) * n];
                    row += 1;
                    for zt in 0..ot {
                        let ti = (zt * st + dt) as isize - pt as isize;
                        if ti < 0 || ti >= it as isize {
                            continue;
                        }
                        for zh in 0..oh {
                            let hi = (zh * sh + dh) as isize - ph as isize;
                            if hi < 0 || hi >= ih as isize {
                                continue;
                            }
                            let dst_row = &mut plane[(ti as usize * ih + hi as usize) * iw..][..iw];
                            let src_row = &src[(zt * oh + zh) * ow..][..ow];
                            for (zw, &g) in src_row.iter().enumerate() {
                                let wi = (zw * sw + dw) as isize - pw as isize;
                                if wi >= 0 && wi < iw as isize {
                                    dst_row[wi as usize] += g;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    grad
}

/// 3-D cross-correlation. `weight` is laid out `(out_ch, in_ch, kt, kh, kw)`;
/// `bias` is either empty (no bias) or one value per output channel.
pub fn conv3d_forward<T: Real>(
    input: &Volume<T>,
    weight: &[T],
    bias: &[T],
    geom: &ConvGeometry,
) -> Result<Volume<T>> {
    let out = check_conv(geom, input, weight)?;
    if !bias.is_empty() && bias.len() != geom.out_ch {
        return Err(Error::dim("bias", geom.out_ch, bias.len()));
    }
    let n: usize = out.iter().product();
    let k = geom.patch_len();
    let mut result = Volume::zeros([geom.out_ch, out[0], out[1], out[2]]);
    {
        let dst = result.data_mut();
        if !bias.is_empty() {
            for (o, chunk) in dst.chunks_mut(n).enumerate() {
                chunk.fill(bias[o]);
            }
        }
        let beta = if bias.is_empty() { T::zero() } else { T::one() };
        if geom.is_pointwise_identity_layout() {
            T::gemm(geom.out_ch, k, n, T::one(), weight, k as isize, 1, input.data(), n as isize, 1, beta, dst, n as isize, 1);
        } else {
            let col = im2col(geom, input, out);
            T::gemm(geom.out_ch, k, n, T::one(), weight, k as isize, 1, &col, n as isize, 1, beta, dst, n as isize, 1);
        }
    }
    Ok(result)
}

/// Gradients of a convolution given the upstream gradient `grad_out`.
///
/// Returns `(grad_input, grad_weight, grad_bias)`; `grad_bias` is empty when
/// `with_bias` is false.
pub(crate) fn conv3d_backward<T: Real>(
    input: &Volume<T>,
    weight: &[T],
    grad_out: &Volume<T>,
    geom: &ConvGeometry,
    with_bias: bool,
    need_input_grad: bool,
) -> (Option<Volume<T>>, Vec<T>, Vec<T>) {
    let out = grad_out.dims();
    let n: usize = out.iter().product();
    let k = geom.patch_len();
    let gy = grad_out.data();
    let owned_col;
    let col: &[T] = if geom.is_pointwise_identity_layout() {
        input.data()
    } else {
        owned_col = im2col(geom, input, out);
        &owned_col
    };
    // dW = dY * col^T
    let mut gw = vec![T::zero(); geom.out_ch * k];
    T::gemm(geom.out_ch, n, k, T::one(), gy, n as isize, 1, col, 1, n as isize, T::zero(), &mut gw, k as isize, 1);
    let gb = if with_bias {
        gy.chunks(n).map(|c| c.iter().copied().sum()).collect()
    } else {
        Vec::new()
    };
    let gx = need_input_grad.then(|| {
        // dcol = W^T * dY
        let mut dcol = vec![T::zero(); k * n];
        T::gemm(k, geom.out_ch, n, T::one(), weight, 1, k as isize, gy, n as isize, 1, T::zero(), &mut dcol, n as isize, 1);
        if geom.is_pointwise_identity_layout() {
            Volume::from_vec([geom.in_ch, out[0], out[1], out[2]], dcol).expect("pointwise layout")
        } else {
            col2im(geom, &dcol, input.dims(), out)
        }
    });
    (gx, gw, gb)
}
