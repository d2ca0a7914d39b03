use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{FeatureMap, Real, SaliencyVolume, Volume};

/// Per-channel statistics and affine parameters of a batch-norm layer.
#[derive(Debug, Clone, Copy)]
pub struct BatchNormParams<'a, T> {
    pub mean: &'a [T],
    pub var: &'a [T],
    pub gamma: &'a [T],
    pub beta: &'a [T],
    pub eps: T,
}

/// Inference-mode batch normalization with stored statistics.
pub fn batchnorm_infer<T: Real>(input: &Volume<T>, p: BatchNormParams<'_, T>) -> Result<Volume<T>> {
    let c = input.channels();
    for (name, v) in [("mean", p.mean), ("var", p.var), ("gamma", p.gamma), ("beta", p.beta)] {
        if v.len() != c {
            return Err(Error::dim(format!("batchnorm.{name}"), c, v.len()));
        }
    }
    if p.eps < T::zero() {
        return Err(Error::Validation("batchnorm eps must be nonnegative".into()));
    }
    if let Some(i) = p.var.iter().position(|&v| v < T::zero()) {
        return Err(Error::Validation(format!("negative variance in channel {i}")));
    }
    let mut out = input.clone();
    for ch in 0..c {
        let scale = p.gamma[ch] / (p.var[ch] + p.eps).sqrt();
        let shift = p.beta[ch] - p.mean[ch] * scale;
        for x in out.channel_mut(ch) {
            *x = *x * scale + shift;
        }
    }
    Ok(out)
}

/// How the channel axis of a feature map is collapsed into saliency.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelNorm {
    #[default]
    L2,
    L1,
    MaxAbs,
}

/// Collapses the channel axis with the Euclidean norm.
pub fn channel_l2_norm<T: Real>(y: &FeatureMap<T>) -> SaliencyVolume<T> {
    channel_norm(y, ChannelNorm::L2)
}

pub fn channel_norm<T: Real>(y: &FeatureMap<T>, kind: ChannelNorm) -> SaliencyVolume<T> {
    let v = y.volume();
    let [_, t, h, w] = v.shape();
    let mut acc = vec![T::zero(); t * h * w];
    for c in 0..v.channels() {
        for (a, &x) in acc.iter_mut().zip(v.channel(c)) {
            match kind {
                ChannelNorm::L2 => *a += x * x,
                ChannelNorm::L1 => *a += x.abs(),
                ChannelNorm::MaxAbs => *a = a.max(x.abs()),
            }
        }
    }
    if kind == ChannelNorm::L2 {
        acc.iter_mut().for_each(|a| *a = a.sqrt());
    }
    SaliencyVolume::new_unchecked(Volume::from_vec([1, t, h, w], acc).expect("shape preserved"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five() {
        let mut v = Volume::<f64>::zeros([2, 1, 1, 2]);
        v.set([0, 0, 0, 1], 3.0);
        v.set([1, 0, 0, 1], -4.0);
        let s = channel_l2_norm(&FeatureMap::new(v).unwrap());
        assert_eq!(s.data(), &[0.0, 5.0]);
    }

    #[test]
    fn alternative_norms() {
        let v = Volume::from_vec([2, 1, 1, 1], vec![3.0f64, -4.0]).unwrap();
        let y = FeatureMap::new(v).unwrap();
        assert_eq!(channel_norm(&y, ChannelNorm::L1).data(), &[7.0]);
        assert_eq!(channel_norm(&y, ChannelNorm::MaxAbs).data(), &[4.0]);
    }

    #[test]
    fn single_channel_ones() {
        let y = FeatureMap::new(Volume::filled([1, 2, 3, 3], 1.0f32)).unwrap();
        assert!(channel_l2_norm(&y).data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn batchnorm_identity_and_gamma_zero() {
        let x = Volume::from_fn([2, 1, 2, 2], |[c, _, h, w]| (c + h * 2 + w) as f64 - 1.5);
        let ones = [1.0, 1.0];
        let zeros = [0.0, 0.0];
        let y = batchnorm_infer(
            &x,
            BatchNormParams { mean: &zeros, var: &ones, gamma: &ones, beta: &zeros, eps: 0.0 },
        )
        .unwrap();
        assert_eq!(y, x);
        let y = batchnorm_infer(
            &x,
            BatchNormParams { mean: &[0.3, 0.1], var: &[2.0, 0.5], gamma: &zeros, beta: &[0.25, -3.0], eps: 1e-5 },
        )
        .unwrap();
        assert!(y.channel(0).iter().all(|&v| v == 0.25));
        assert!(y.channel(1).iter().all(|&v| v == -3.0));
    }

    #[test]
    fn batchnorm_negative_variance() {
        let x = Volume::<f32>::zeros([1, 1, 1, 1]);
        let err = batchnorm_infer(
            &x,
            BatchNormParams { mean: &[0.0], var: &[-1.0], gamma: &[1.0], beta: &[0.0], eps: 1e-5 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }
}
