//! Graph executor shared by inference and training.

use crate::error::{Error, Result};
use crate::tensor::{
    batchnorm_infer, conv3d_forward, global_avg_pool, linear_forward, relu_volume, BatchNormParams,
    Real, Volume,
};

use super::spec::{LayerKind, ModelSpec};
use super::weights::Weights;

/// Source of batch-norm statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Stored running statistics (inference).
    Running,
    /// Statistics of the current batch (training).
    Batch,
}

/// Per-layer intermediates a batch-mode batch norm leaves for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct BnCache<T> {
    pub xhat: Vec<Volume<T>>,
    pub inv_std: Vec<T>,
    pub mean: Vec<f64>,
    /// Unbiased, for the running estimate.
    pub var_unbiased: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Trace<T> {
    /// `nodes[n][b]`: activation of node `n` for batch item `b`.
    pub nodes: Vec<Vec<Volume<T>>>,
    pub bn: Vec<Option<BnCache<T>>>,
}

impl<T: Real> Trace<T> {
    /// Head output per batch item.
    pub fn outputs(&self) -> Vec<T> {
        self.nodes
            .last()
            .expect("graph has a head")
            .iter()
            .map(|v| v.data()[0])
            .collect()
    }
}

pub(crate) fn execute<T: Real>(
    spec: &ModelSpec,
    weights: &Weights<T>,
    inputs: Vec<Volume<T>>,
    mode: BnMode,
) -> Result<Trace<T>> {
    if inputs.is_empty() {
        return Err(Error::Validation("empty batch".into()));
    }
    let want = [1, spec.input_dims[0], spec.input_dims[1], spec.input_dims[2]];
    for x in &inputs {
        let got = x.shape();
        for (a, axis) in ["c", "t", "h", "w"].iter().enumerate() {
            if got[a] != want[a] {
                return Err(Error::dim(format!("input.{axis}"), want[a], got[a]));
            }
        }
    }
    let slots = spec.param_slots();
    let param = |layer: usize, k: usize| -> &[T] { &weights.blocks[slots[layer][k]].data };
    let mut nodes: Vec<Vec<Volume<T>>> = Vec::with_capacity(spec.layers.len() + 1);
    nodes.push(inputs);
    let mut bn = Vec::with_capacity(spec.layers.len());
    for (li, layer) in spec.layers.iter().enumerate() {
        let src = |k: usize| &nodes[layer.inputs[k]];
        let mut cache = None;
        let out: Vec<Volume<T>> = match &layer.kind {
            LayerKind::Conv { geometry, bias } => {
                let b: &[T] = if *bias { param(li, 1) } else { &[] };
                src(0)
                    .iter()
                    .map(|x| conv3d_forward(x, param(li, 0), b, geometry))
                    .collect::<Result<_>>()?
            }
            LayerKind::BatchNorm { eps, .. } => {
                let (gamma, beta) = (param(li, 0), param(li, 1));
                let eps = T::lit(*eps);
                match mode {
                    BnMode::Running => src(0)
                        .iter()
                        .map(|x| {
                            batchnorm_infer(
                                x,
                                BatchNormParams {
                                    mean: param(li, 2),
                                    var: param(li, 3),
                                    gamma,
                                    beta,
                                    eps,
                                },
                            )
                        })
                        .collect::<Result<_>>()?,
                    BnMode::Batch => {
                        let (out, c) = batchnorm_batch(src(0), gamma, beta, eps);
                        cache = Some(c);
                        out
                    }
                }
            }
            LayerKind::Relu => src(0).iter().map(relu_volume).collect(),
            LayerKind::Add => src(0)
                .iter()
                .zip(src(1))
                .map(|(a, b)| {
                    let mut s = a.clone();
                    s.data_mut().iter_mut().zip(b.data()).for_each(|(x, &y)| *x += y);
                    s
                })
                .collect(),
            LayerKind::Concat => (0..src(0).len())
                .map(|b| {
                    let parts: Vec<&Volume<T>> = layer.inputs.iter().map(|&n| &nodes[n][b]).collect();
                    concat_channels(&parts)
                })
                .collect(),
            LayerKind::GlobalAvgPool => src(0).iter().map(global_avg_pool).collect(),
            LayerKind::Linear { out_features, .. } => src(0)
                .iter()
                .map(|x| {
                    let y = linear_forward(x.data(), param(li, 0), param(li, 1))?;
                    Volume::from_vec([*out_features, 1, 1, 1], y)
                })
                .collect::<Result<_>>()?,
        };
        nodes.push(out);
        bn.push(cache);
    }
    Ok(Trace { nodes, bn })
}

pub(crate) fn concat_channels<T: Real>(parts: &[&Volume<T>]) -> Volume<T> {
    let [_, t, h, w] = parts[0].shape();
    let c = parts.iter().map(|p| p.channels()).sum();
    let mut data = Vec::with_capacity(c * t * h * w);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    Volume::from_vec([c, t, h, w], data).expect("concat shapes checked by spec")
}

fn batchnorm_batch<T: Real>(
    xs: &[Volume<T>],
    gamma: &[T],
    beta: &[T],
    eps: T,
) -> (Vec<Volume<T>>, BnCache<T>) {
    let channels = xs[0].channels();
    let m = (xs.len() * xs[0].plane_len()) as f64;
    let mut mean = vec![0.0f64; channels];
    let mut var = vec![0.0f64; channels];
    for c in 0..channels {
        let s: f64 = xs.iter().flat_map(|x| x.channel(c)).map(|v| v.as_f64()).sum();
        mean[c] = s / m;
        let ss: f64 = xs
            .iter()
            .flat_map(|x| x.channel(c))
            .map(|v| (v.as_f64() - mean[c]).powi(2))
            .sum();
        var[c] = ss / m;
    }
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (T::lit(v) + eps).sqrt()).collect();
    let mut xhat = Vec::with_capacity(xs.len());
    let mut out = Vec::with_capacity(xs.len());
    for x in xs {
        let mut xh = x.clone();
        let mut y = x.clone();
        for c in 0..channels {
            let mu = T::lit(mean[c]);
            for (a, b) in xh.channel_mut(c).iter_mut().zip(y.channel_mut(c).iter_mut()) {
                *a = (*a - mu) * inv_std[c];
                *b = gamma[c] * *a + beta[c];
            }
        }
        xhat.push(xh);
        out.push(y);
    }
    let var_unbiased = if m > 1.0 {
        var.iter().map(|v| v * m / (m - 1.0)).collect()
    } else {
        var.clone()
    };
    (
        out,
        BnCache {
            xhat,
            inv_std,
            mean,
            var_unbiased,
        },
    )
}
