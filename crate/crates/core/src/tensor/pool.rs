use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Real, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    Max,
    Average,
}

/// Unpadded per-channel window pooling.
pub fn pool3d<T: Real>(
    input: &Volume<T>,
    mode: PoolMode,
    window: [usize; 3],
    stride: [usize; 3],
) -> Result<Volume<T>> {
    let dims = input.dims();
    let mut out = [0; 3];
    for a in 0..3 {
        if window[a] == 0 || stride[a] == 0 {
            return Err(Error::Config("pool window and stride must be >= 1".into()));
        }
        if window[a] > dims[a] {
            return Err(Error::Config(format!(
                "pool window {} exceeds input extent {} on axis {}",
                window[a],
                dims[a],
                ["t", "h", "w"][a]
            )));
        }
        out[a] = (dims[a] - window[a]) / stride[a] + 1;
    }
    let count = T::from_usize(window.iter().product()).unwrap();
    let mut result = Volume::zeros([input.channels(), out[0], out[1], out[2]]);
    for c in 0..input.channels() {
        for ot in 0..out[0] {
            for oh in 0..out[1] {
                for ow in 0..out[2] {
                    let mut acc = match mode {
                        PoolMode::Max => T::neg_infinity(),
                        PoolMode::Average => T::zero(),
                    };
                    for dt in 0..window[0] {
                        for dh in 0..window[1] {
                            for dw in 0..window[2] {
                                let v = input.get([
                                    c,
                                    ot * stride[0] + dt,
                                    oh * stride[1] + dh,
                                    ow * stride[2] + dw,
                                ]);
                                match mode {
                                    PoolMode::Max => acc = acc.max(v),
                                    PoolMode::Average => acc += v,
                                }
                            }
                        }
                    }
                    if mode == PoolMode::Average {
                        acc = acc / count;
                    }
                    result.set([c, ot, oh, ow], acc);
                }
            }
        }
    }
    Ok(result)
}

/// Mean over all positions of each channel; output shape `(c, 1, 1, 1)`.
pub fn global_avg_pool<T: Real>(input: &Volume<T>) -> Volume<T> {
    let n = T::from_usize(input.plane_len()).unwrap();
    let data = (0..input.channels())
        .map(|c| input.channel(c).iter().copied().sum::<T>() / n)
        .collect();
    Volume::from_vec([input.channels(), 1, 1, 1], data).expect("one value per channel")
}
