use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::model::exec;
use crate::model::{BnMode, ModelSpec, Weights};

use super::backward::{backward, Batch};
use super::loss::LossKind;

/// Above this many trainable scalars only a seeded subsample is checked.
pub const EXHAUSTIVE_LIMIT: usize = 10_000;
/// Coordinates checked when subsampling.
pub const SUBSAMPLE: usize = 2_000;
/// Gradients smaller than this are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: Option<String>,
    pub worst_index: usize,
    pub checked: usize,
    pub trainable: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn batch_loss(spec: &ModelSpec, weights: &Weights<f64>, batch: &Batch, loss: LossKind) -> Result<f64> {
    let inputs = batch.clips().iter().map(|c| c.volume().cast()).collect();
    let trace = exec::execute(spec, weights, inputs, BnMode::Batch)?;
    let outs = trace.outputs();
    Ok(outs
        .iter()
        .zip(batch.targets())
        .map(|(&z, &y)| loss.eval(z, y).0)
        .sum::<f64>()
        / batch.len() as f64)
}

/// Compares [`backward`] against central differences in `f64`.
pub fn grad_check(
    spec: &ModelSpec,
    weights: &Weights<f64>,
    batch: &Batch,
    loss: LossKind,
    eps: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let analytic = backward(spec, weights, batch, loss)?.grads;
    let decls = spec.param_decls();
    let coords: Vec<(usize, usize)> = decls
        .iter()
        .enumerate()
        .filter(|(_, d)| d.role.trainable())
        .flat_map(|(b, d)| (0..d.len()).map(move |i| (b, i)))
        .collect();
    let trainable = coords.len();
    let picked: Vec<(usize, usize)> = if trainable > EXHAUSTIVE_LIMIT {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, trainable, SUBSAMPLE).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| coords[i]).collect()
    } else {
        coords
    };
    let mut w = weights.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: None,
        worst_index: 0,
        checked: picked.len(),
        trainable,
    };
    for (b, i) in picked {
        let orig = w.blocks[b].data[i];
        w.blocks[b].data[i] = orig + eps;
        let plus = batch_loss(spec, &w, batch, loss)?;
        w.blocks[b].data[i] = orig - eps;
        let minus = batch_loss(spec, &w, batch, loss)?;
        w.blocks[b].data[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let err = relative_error(analytic.blocks[b].data[i], numeric);
        if err > report.max_rel_error || report.worst_param.is_none() {
            report.max_rel_error = err.max(report.max_rel_error);
            report.worst_param = Some(decls[b].name.clone());
            report.worst_index = i;
        }
    }
    Ok(report)
}
