//! Deterministic kernels over `(channel, time, height, width)` volumes.
//!
//! Everything here is a pure function of its inputs, generic over [`Real`]
//! so the same code runs in `f32` at runtime and `f64` under test.

mod conv;
mod linear;
mod norm;
mod pool;
mod scalar;
mod spline;
mod volume;

pub use conv::{conv3d_forward, ConvGeometry};
pub(crate) use conv::conv3d_backward;
pub use linear::{linear_forward, relu, relu_volume};
pub use norm::{batchnorm_infer, channel_l2_norm, channel_norm, BatchNormParams, ChannelNorm};
pub use pool::{global_avg_pool, pool3d, PoolMode};
pub use scalar::Real;
pub use spline::{source_coordinate, spline_resize3d};
pub use volume::{FeatureMap, SaliencyVolume, VideoClip, Volume};
