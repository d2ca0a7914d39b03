use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ConvGeometry;

/// Node 0 is the input clip; layer `i` writes node `i + 1`.
pub type NodeId = usize;

pub const INPUT_NODE: NodeId = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Conv { geometry: ConvGeometry, bias: bool },
    BatchNorm { channels: usize, eps: f64 },
    Relu,
    /// Elementwise sum of two equally shaped inputs.
    Add,
    /// Channel concatenation, inputs in order.
    Concat,
    GlobalAvgPool,
    Linear { in_features: usize, out_features: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
    pub inputs: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    /// Presence logit; positive means present.
    Logit,
    /// Scalar regression target.
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamRole {
    Weight,
    Bias,
    Gamma,
    Beta,
    RunningMean,
    RunningVar,
}

impl ParamRole {
    pub fn trainable(self) -> bool {
        !matches!(self, ParamRole::RunningMean | ParamRole::RunningVar)
    }

    fn suffix(self) -> &'static str {
        match self {
            ParamRole::Weight => "weight",
            ParamRole::Bias => "bias",
            ParamRole::Gamma => "gamma",
            ParamRole::Beta => "beta",
            ParamRole::RunningMean => "running_mean",
            ParamRole::RunningVar => "running_var",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDecl {
    pub name: String,
    pub shape: Vec<usize>,
    pub role: ParamRole,
    pub layer: usize,
}

impl ParamDecl {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Architecture description: an ordered layer DAG with named tap points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    /// `(t, h, w)` of the single-channel input clip.
    pub input_dims: [usize; 3],
    pub layers: Vec<Layer>,
    /// Tap name -> layer index.
    pub taps: BTreeMap<String, usize>,
    pub default_tap: String,
    pub output: OutputKind,
}

impl ModelSpec {
    /// Infers every node's `(c, t, h, w)` and checks the graph is well formed.
    pub fn node_shapes(&self) -> Result<Vec<[usize; 4]>> {
        let [t, h, w] = self.input_dims;
        if t == 0 || h == 0 || w == 0 {
            return Err(Error::Config("model input dims must be >= 1".into()));
        }
        let mut shapes = vec![[1, t, h, w]];
        for (i, layer) in self.layers.iter().enumerate() {
            let arity_ok = match layer.kind {
                LayerKind::Add => layer.inputs.len() == 2,
                LayerKind::Concat => !layer.inputs.is_empty(),
                _ => layer.inputs.len() == 1,
            };
            if !arity_ok {
                return Err(Error::Config(format!(
                    "layer `{}` has {} inputs",
                    layer.name,
                    layer.inputs.len()
                )));
            }
            if let Some(&bad) = layer.inputs.iter().find(|&&n| n > i) {
                return Err(Error::Config(format!(
                    "layer `{}` reads node {bad} which is not computed yet",
                    layer.name
                )));
            }
            let ins: Vec<[usize; 4]> = layer.inputs.iter().map(|&n| shapes[n]).collect();
            let ctx = |axis: &str| format!("{}.{axis}", layer.name);
            let out = match &layer.kind {
                LayerKind::Conv { geometry, .. } => {
                    if ins[0][0] != geometry.in_ch {
                        return Err(Error::dim(ctx("in_channels"), geometry.in_ch, ins[0][0]));
                    }
                    let d = geometry.output_dims([ins[0][1], ins[0][2], ins[0][3]])?;
                    [geometry.out_ch, d[0], d[1], d[2]]
                }
                LayerKind::BatchNorm { channels, eps } => {
                    if ins[0][0] != *channels {
                        return Err(Error::dim(ctx("channels"), *channels, ins[0][0]));
                    }
                    if !(*eps > 0.0) {
                        return Err(Error::Config(format!("layer `{}` needs eps > 0", layer.name)));
                    }
                    ins[0]
                }
                LayerKind::Relu => ins[0],
                LayerKind::Add => {
                    if ins[0] != ins[1] {
                        return Err(Error::Config(format!(
                            "layer `{}` adds shapes {:?} and {:?}",
                            layer.name, ins[0], ins[1]
                        )));
                    }
                    ins[0]
                }
                LayerKind::Concat => {
                    let first = ins[0];
                    for s in &ins[1..] {
                        if s[1..] != first[1..] {
                            return Err(Error::Config(format!(
                                "layer `{}` concatenates mismatched grids {:?} and {:?}",
                                layer.name, first, s
                            )));
                        }
                    }
                    [ins.iter().map(|s| s[0]).sum(), first[1], first[2], first[3]]
                }
                LayerKind::GlobalAvgPool => [ins[0][0], 1, 1, 1],
                LayerKind::Linear { in_features, out_features } => {
                    let flat: usize = ins[0].iter().product();
                    if flat != *in_features {
                        return Err(Error::dim(ctx("in_features"), *in_features, flat));
                    }
                    [*out_features, 1, 1, 1]
                }
            };
            shapes.push(out);
        }
        match self.layers.last() {
            Some(Layer {
                kind: LayerKind::Linear { out_features: 1, .. },
                ..
            }) => {}
            _ => {
                return Err(Error::Config(
                    "model must end in a single-output linear head".into(),
                ))
            }
        }
        for (name, &idx) in &self.taps {
            let layer = self
                .layers
                .get(idx)
                .ok_or_else(|| Error::Config(format!("tap `{name}` points past the last layer")))?;
            if matches!(layer.kind, LayerKind::GlobalAvgPool | LayerKind::Linear { .. }) {
                return Err(Error::Config(format!(
                    "tap `{name}` must sit on a layer that keeps (c, t, h, w)"
                )));
            }
        }
        if !self.taps.contains_key(&self.default_tap) {
            return Err(Error::UnknownTap(self.default_tap.clone()));
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        self.node_shapes().map(|_| ())
    }

    pub fn tap_layer(&self, tap: &str) -> Result<usize> {
        self.taps
            .get(tap)
            .copied()
            .ok_or_else(|| Error::UnknownTap(tap.to_owned()))
    }

    /// Parameter blocks in storage order.
    pub fn param_decls(&self) -> Vec<ParamDecl> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut push = |role: ParamRole, shape: Vec<usize>| {
                out.push(ParamDecl {
                    name: format!("{}.{}", layer.name, role.suffix()),
                    shape,
                    role,
                    layer: i,
                })
            };
            match &layer.kind {
                LayerKind::Conv { geometry, bias } => {
                    push(ParamRole::Weight, geometry.weight_shape().to_vec());
                    if *bias {
                        push(ParamRole::Bias, vec![geometry.out_ch]);
                    }
                }
                LayerKind::BatchNorm { channels, .. } => {
                    for role in [
                        ParamRole::Gamma,
                        ParamRole::Beta,
                        ParamRole::RunningMean,
                        ParamRole::RunningVar,
                    ] {
                        push(role, vec![*channels]);
                    }
                }
                LayerKind::Linear { in_features, out_features } => {
                    push(ParamRole::Weight, vec![*out_features, *in_features]);
                    push(ParamRole::Bias, vec![*out_features]);
                }
                LayerKind::Relu | LayerKind::Add | LayerKind::Concat | LayerKind::GlobalAvgPool => {}
            }
        }
        out
    }

    /// For each layer, the indices of its parameter blocks in storage order.
    pub fn param_slots(&self) -> Vec<Vec<usize>> {
        let mut slots = vec![Vec::new(); self.layers.len()];
        for (i, d) in self.param_decls().iter().enumerate() {
            slots[d.layer].push(i);
        }
        slots
    }

    pub fn head_layer(&self) -> usize {
        self.layers.len() - 1
    }
}

/// Incremental construction helper that tracks node ids.
pub(crate) struct SpecBuilder {
    layers: Vec<Layer>,
    taps: BTreeMap<String, usize>,
}

impl SpecBuilder {
    pub fn new() -> Self {
        Self {
            layers: Vec::new(),
            taps: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, kind: LayerKind, inputs: Vec<NodeId>) -> NodeId {
        self.layers.push(Layer {
            name: name.into(),
            kind,
            inputs,
        });
        self.layers.len()
    }

    pub fn conv(&mut self, name: &str, input: NodeId, geometry: ConvGeometry, bias: bool) -> NodeId {
        self.push(name, LayerKind::Conv { geometry, bias }, vec![input])
    }

    pub fn bn(&mut self, name: &str, input: NodeId, channels: usize) -> NodeId {
        self.push(name, LayerKind::BatchNorm { channels, eps: 1e-5 }, vec![input])
    }

    pub fn relu(&mut self, name: &str, input: NodeId) -> NodeId {
        self.push(name, LayerKind::Relu, vec![input])
    }

    /// Tags the layer that produced `node`.
    pub fn tap(&mut self, name: &str, node: NodeId) {
        self.taps.insert(name.to_owned(), node - 1);
    }

    pub fn finish(self, name: &str, input_dims: [usize; 3], default_tap: &str, output: OutputKind) -> Result<ModelSpec> {
        let spec = ModelSpec {
            name: name.to_owned(),
            input_dims,
            layers: self.layers,
            taps: self.taps,
            default_tap: default_tap.to_owned(),
            output,
        };
        spec.validate()?;
        Ok(spec)
    }
}
