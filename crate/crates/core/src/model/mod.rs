//! Decision networks: architecture specs, weights, forward passes with tap
//! capture, and NNWF serialization.

mod build;
pub(crate) mod exec;
mod io;
mod spec;
mod weights;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor::{FeatureMap, Real, VideoClip};

pub use build::{
    build_tiny_dualrate, build_tiny_x3d, residual_net_spec, tiny_dualrate_spec, tiny_x3d_spec, DUALRATE_NAME,
    SPATIAL_STRIDE, TEMPORAL_STRIDE, X3D_NAME,
};
pub use exec::BnMode;
pub use io::{decode_weights, encode_weights, load_weights, save_weights};
pub use spec::{Layer, LayerKind, ModelSpec, NodeId, OutputKind, ParamDecl, ParamRole, INPUT_NODE};
pub use weights::{ParamBlock, Weights};

/// Decision output: `present` iff `logit > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub logit: f64,
    pub present: bool,
}

impl Prediction {
    pub fn from_logit(logit: f64) -> Self {
        Self {
            logit,
            present: logit > 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput<T> {
    /// Logit for decision nets, regression value otherwise.
    pub value: T,
    pub feature_map: Option<FeatureMap<T>>,
}

impl<T: Real> ForwardOutput<T> {
    pub fn prediction(&self) -> Prediction {
        Prediction::from_logit(self.value.as_f64())
    }
}

/// Inference-mode forward pass; optionally returns the activation at `tap`.
pub fn forward<T: Real>(
    spec: &ModelSpec,
    weights: &Weights<T>,
    clip: &VideoClip,
    tap: Option<&str>,
) -> Result<ForwardOutput<T>> {
    let tap_layer = tap.map(|t| spec.tap_layer(t)).transpose()?;
    let mut trace = exec::execute(spec, weights, vec![clip.volume().cast()], BnMode::Running)?;
    let value = trace.outputs()[0];
    let feature_map = match tap_layer {
        Some(layer) => Some(FeatureMap::new(trace.nodes[layer + 1].swap_remove(0))?),
        None => None,
    };
    Ok(ForwardOutput { value, feature_map })
}
