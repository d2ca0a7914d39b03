//! Reverse pass over the fixed layer set.

use crate::error::{Error, Result};
use crate::model::exec::{self, BnCache, Trace};
use crate::model::{BnMode, LayerKind, ModelSpec, Weights};
use crate::tensor::{conv3d_backward, Real, VideoClip, Volume};

use super::loss::LossKind;

/// Clips with one target each (0/1 presence labels or real regression targets).
#[derive(Debug, Clone)]
pub struct Batch {
    clips: Vec<VideoClip>,
    targets: Vec<f64>,
}

impl Batch {
    pub fn new(clips: Vec<VideoClip>, targets: Vec<f64>) -> Result<Self> {
        if clips.is_empty() {
            return Err(Error::Validation("batch is empty".into()));
        }
        if clips.len() != targets.len() {
            return Err(Error::dim("batch.targets", clips.len(), targets.len()));
        }
        let dims = clips[0].dims();
        if let Some(c) = clips.iter().find(|c| c.dims() != dims) {
            return Err(Error::Validation(format!(
                "batch mixes clip dims {:?} and {:?}",
                dims,
                c.dims()
            )));
        }
        Ok(Self { clips, targets })
    }

    pub fn clips(&self) -> &[VideoClip] {
        &self.clips
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }
}

/// Batch statistics of one batch-norm layer.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub layer: usize,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BackwardOutput<T> {
    /// Mean loss over the batch.
    pub loss: f64,
    /// Aligned with the weights; zero for running statistics.
    pub grads: Weights<T>,
    /// Network output per clip (batch-statistics mode).
    pub outputs: Vec<f64>,
    pub batch_stats: Vec<BatchStats>,
}

fn accumulate<T: Real>(slot: &mut Option<Vec<Volume<T>>>, g: Vec<Volume<T>>) {
    match slot {
        None => *slot = Some(g),
        Some(acc) => {
            for (a, b) in acc.iter_mut().zip(g) {
                a.data_mut().iter_mut().zip(b.data()).for_each(|(x, &y)| *x += y);
            }
        }
    }
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    dst.iter_mut().zip(src).for_each(|(a, &b)| *a += b);
}

/// Mean loss and its gradient for every parameter, with batch norm using the
/// statistics of this batch.
pub fn backward<T: Real>(
    spec: &ModelSpec,
    weights: &Weights<T>,
    batch: &Batch,
    loss: LossKind,
) -> Result<BackwardOutput<T>> {
    let inputs = batch.clips.iter().map(|c| c.volume().cast()).collect();
    let mut trace = exec::execute(spec, weights, inputs, BnMode::Batch)?;
    let outputs: Vec<f64> = trace.outputs().iter().map(|v| v.as_f64()).collect();
    let n = batch.len() as f64;
    let mut total = 0.0;
    let mut head_grad = Vec::with_capacity(batch.len());
    for (&z, &y) in outputs.iter().zip(&batch.targets) {
        let (l, g) = loss.eval(z, y);
        total += l;
        head_grad.push(Volume::from_vec([1, 1, 1, 1], vec![T::lit(g / n)])?);
    }
    let grads = backprop(spec, weights, &mut trace, head_grad);
    let batch_stats = trace
        .bn
        .iter()
        .enumerate()
        .filter_map(|(layer, c)| {
            c.as_ref().map(|c| BatchStats {
                layer,
                mean: c.mean.clone(),
                var: c.var_unbiased.clone(),
            })
        })
        .collect();
    Ok(BackwardOutput {
        loss: total / n,
        grads,
        outputs,
        batch_stats,
    })
}

fn backprop<T: Real>(
    spec: &ModelSpec,
    weights: &Weights<T>,
    trace: &mut Trace<T>,
    head_grad: Vec<Volume<T>>,
) -> Weights<T> {
    let slots = spec.param_slots();
    let mut grads = Weights::zeros_like(spec);
    let mut node_grads: Vec<Option<Vec<Volume<T>>>> = vec![None; trace.nodes.len()];
    *node_grads.last_mut().unwrap() = Some(head_grad);

    for (li, layer) in spec.layers.iter().enumerate().rev() {
        let Some(g_out) = node_grads[li + 1].take() else {
            continue;
        };
        // Activations of this layer are no longer needed once its gradient is known.
        let output = std::mem::take(&mut trace.nodes[li + 1]);
        let input_node = layer.inputs[0];
        let needs_input = input_node != 0;
        match &layer.kind {
            LayerKind::Conv { geometry, bias } => {
                let w = &weights.blocks[slots[li][0]].data;
                let mut g_in = Vec::with_capacity(g_out.len());
                for (x, g) in trace.nodes[input_node].iter().zip(&g_out) {
                    let (gx, gw, gb) = conv3d_backward(x, w, g, geometry, *bias, needs_input);
                    add_into(&mut grads.blocks[slots[li][0]].data, &gw);
                    if *bias {
                        add_into(&mut grads.blocks[slots[li][1]].data, &gb);
                    }
                    if let Some(gx) = gx {
                        g_in.push(gx);
                    }
                }
                if needs_input {
                    accumulate(&mut node_grads[input_node], g_in);
                }
            }
            LayerKind::BatchNorm { .. } => {
                let cache: &BnCache<T> = trace.bn[li]
                    .as_ref()
                    .expect("batch-mode trace caches batch norm");
                let gamma = &weights.blocks[slots[li][0]].data;
                let channels = gamma.len();
                let m = T::from_usize(g_out.len() * g_out[0].plane_len()).unwrap();
                let mut g_in: Vec<Volume<T>> = g_out.clone();
                for c in 0..channels {
                    let mut sum_g = T::zero();
                    let mut sum_gx = T::zero();
                    for (g, xh) in g_out.iter().zip(&cache.xhat) {
                        for (&a, &b) in g.channel(c).iter().zip(xh.channel(c)) {
                            sum_g += a;
                            sum_gx += a * b;
                        }
                    }
                    grads.blocks[slots[li][0]].data[c] += sum_gx;
                    grads.blocks[slots[li][1]].data[c] += sum_g;
                    let scale = gamma[c] * cache.inv_std[c];
                    let mean_g = sum_g / m;
                    let mean_gx = sum_gx / m;
                    for (gi, xh) in g_in.iter_mut().zip(&cache.xhat) {
                        for (a, &b) in gi.channel_mut(c).iter_mut().zip(xh.channel(c)) {
                            *a = scale * (*a - mean_g - b * mean_gx);
                        }
                    }
                }
                if needs_input {
                    accumulate(&mut node_grads[input_node], g_in);
                }
            }
            LayerKind::Relu => {
                let g_in = g_out
                    .into_iter()
                    .zip(&output)
                    .map(|(mut g, y)| {
                        g.data_mut()
                            .iter_mut()
                            .zip(y.data())
                            .for_each(|(a, &v)| {
                                if !(v > T::zero()) {
                                    *a = T::zero()
                                }
                            });
                        g
                    })
                    .collect();
                if needs_input {
                    accumulate(&mut node_grads[input_node], g_in);
                }
            }
            LayerKind::Add => {
                for &src in &layer.inputs {
                    if src != 0 {
                        accumulate(&mut node_grads[src], g_out.clone());
                    }
                }
            }
            LayerKind::Concat => {
                let mut offset = 0;
                for &src in &layer.inputs {
                    let c = trace.nodes[src][0].channels();
                    if src != 0 {
                        let part = g_out
                            .iter()
                            .map(|g| {
                                let [_, t, h, w] = g.shape();
                                let n = t * h * w;
                                Volume::from_vec([c, t, h, w], g.data()[offset * n..(offset + c) * n].to_vec())
                                    .expect("concat split")
                            })
                            .collect();
                        accumulate(&mut node_grads[src], part);
                    }
                    offset += c;
                }
            }
            LayerKind::GlobalAvgPool => {
                let g_in = g_out
                    .iter()
                    .zip(&trace.nodes[input_node])
                    .map(|(g, x)| {
                        let n = T::from_usize(x.plane_len()).unwrap();
                        let mut gi = Volume::zeros(x.shape());
                        for c in 0..x.channels() {
                            gi.channel_mut(c).fill(g.data()[c] / n);
                        }
                        gi
                    })
                    .collect();
                if needs_input {
                    accumulate(&mut node_grads[input_node], g_in);
                }
            }
            LayerKind::Linear { in_features, out_features } => {
                let w = &weights.blocks[slots[li][0]].data;
                let mut g_in = Vec::with_capacity(g_out.len());
                for (x, g) in trace.nodes[input_node].iter().zip(&g_out) {
                    let gw = &mut grads.blocks[slots[li][0]].data;
                    for o in 0..*out_features {
                        let go = g.data()[o];
                        for i in 0..*in_features {
                            gw[o * in_features + i] += go * x.data()[i];
                        }
                    }
                    add_into(&mut grads.blocks[slots[li][1]].data, g.data());
                    let mut gx = Volume::zeros(x.shape());
                    for i in 0..*in_features {
                        gx.data_mut()[i] = (0..*out_features)
                            .map(|o| w[o * in_features + i] * g.data()[o])
                            .sum();
                    }
                    g_in.push(gx);
                }
                if needs_input {
                    accumulate(&mut node_grads[input_node], g_in);
                }
            }
        }
    }
    grads
}
