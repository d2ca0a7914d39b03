use crate::error::{Error, Result};
use crate::model::{ModelSpec, ParamRole, Weights};
use crate::tensor::Real;

use super::backward::BatchStats;

#[derive(Debug, Clone, Copy)]
pub struct SgdParams {
    pub learning_rate: f64,
    pub momentum: f64,
}

/// `v <- momentum * v - lr * g; w <- w + v` on every trainable block.
///
/// Returns the updated `(weights, velocity)`; running statistics are carried
/// over untouched.
pub fn sgd_step<T: Real>(
    spec: &ModelSpec,
    weights: &Weights<T>,
    grads: &Weights<T>,
    velocity: &Weights<T>,
    params: SgdParams,
) -> Result<(Weights<T>, Weights<T>)> {
    if !(params.learning_rate >= 0.0) || !(0.0..1.0).contains(&params.momentum) {
        return Err(Error::Config(format!(
            "invalid optimizer settings lr={} momentum={}",
            params.learning_rate, params.momentum
        )));
    }
    let decls = spec.param_decls();
    if grads.blocks.len() != decls.len() || velocity.blocks.len() != decls.len() {
        return Err(Error::dim("parameter_blocks", decls.len(), grads.blocks.len()));
    }
    let lr = T::lit(params.learning_rate);
    let mu = T::lit(params.momentum);
    let mut w = weights.clone();
    let mut v = velocity.clone();
    for (i, d) in decls.iter().enumerate() {
        if !d.role.trainable() {
            continue;
        }
        for ((wi, vi), &gi) in w.blocks[i]
            .data
            .iter_mut()
            .zip(v.blocks[i].data.iter_mut())
            .zip(&grads.blocks[i].data)
        {
            *vi = mu * *vi - lr * gi;
            *wi += *vi;
        }
    }
    Ok((w, v))
}

/// `running <- keep * running + (1 - keep) * batch` for every batch-norm layer.
pub fn update_running_stats<T: Real>(spec: &ModelSpec, weights: &mut Weights<T>, stats: &[BatchStats], keep: f64) {
    let slots = spec.param_slots();
    let decls = spec.param_decls();
    for s in stats {
        for &slot in &slots[s.layer] {
            let src = match decls[slot].role {
                ParamRole::RunningMean => &s.mean,
                ParamRole::RunningVar => &s.var,
                _ => continue,
            };
            for (r, &b) in weights.blocks[slot].data.iter_mut().zip(src) {
                *r = T::lit(keep * r.as_f64() + (1.0 - keep) * b);
            }
        }
    }
}
