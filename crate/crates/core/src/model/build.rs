//! The two miniature decision networks.

use crate::error::{Error, Result};
use crate::tensor::ConvGeometry;

use super::spec::{LayerKind, ModelSpec, NodeId, OutputKind, SpecBuilder, INPUT_NODE};
use super::weights::Weights;

/// Spatial downsampling of both architectures (four stride-2 stages).
pub const SPATIAL_STRIDE: usize = 16;
/// Temporal downsampling of both architectures.
pub const TEMPORAL_STRIDE: usize = 4;

pub const X3D_NAME: &str = "tiny_x3d";
pub const DUALRATE_NAME: &str = "tiny_dualrate";

fn check_dims(input_dims: [usize; 3], widths: &[usize], spatial: usize, temporal: usize) -> Result<()> {
    let [t, h, w] = input_dims;
    if t == 0 || t % temporal != 0 {
        return Err(Error::Config(format!(
            "clip length {t} must be a positive multiple of {temporal}"
        )));
    }
    for (axis, n) in [("height", h), ("width", w)] {
        if n == 0 || n % spatial != 0 {
            return Err(Error::Config(format!(
                "clip {axis} {n} must be a positive multiple of {spatial}"
            )));
        }
    }
    if widths.is_empty() || widths.contains(&0) {
        return Err(Error::Config("channel widths must be non-empty and >= 1".into()));
    }
    Ok(())
}

/// Residual stage: two 3x3x3 conv+BN with ReLU between, projection skip when
/// the shape changes, ReLU after the sum.
fn residual_stage(
    b: &mut SpecBuilder,
    name: &str,
    input: NodeId,
    in_ch: usize,
    out_ch: usize,
    stride: [usize; 3],
) -> NodeId {
    let c1 = b.conv(&format!("{name}.conv1"), input, ConvGeometry::cubic(in_ch, out_ch, 3, stride, 1), false);
    let n1 = b.bn(&format!("{name}.bn1"), c1, out_ch);
    let r1 = b.relu(&format!("{name}.relu1"), n1);
    let c2 = b.conv(&format!("{name}.conv2"), r1, ConvGeometry::cubic(out_ch, out_ch, 3, [1, 1, 1], 1), false);
    let n2 = b.bn(&format!("{name}.bn2"), c2, out_ch);
    let skip = if in_ch == out_ch && stride == [1, 1, 1] {
        input
    } else {
        let p = b.conv(&format!("{name}.proj"), input, ConvGeometry::cubic(in_ch, out_ch, 1, stride, 0), false);
        b.bn(&format!("{name}.proj_bn"), p, out_ch)
    };
    let sum = b.push(format!("{name}.add"), LayerKind::Add, vec![n2, skip]);
    b.relu(&format!("{name}.out"), sum)
}

fn stem(b: &mut SpecBuilder, name: &str, out_ch: usize, stride: [usize; 3]) -> NodeId {
    let c = b.conv(&format!("{name}.conv"), INPUT_NODE, ConvGeometry::cubic(1, out_ch, 3, stride, 1), false);
    let n = b.bn(&format!("{name}.bn"), c, out_ch);
    b.relu(&format!("{name}.out"), n)
}

fn head(b: &mut SpecBuilder, input: NodeId, channels: usize) {
    let pooled = b.push("pool", LayerKind::GlobalAvgPool, vec![input]);
    b.push(
        "head",
        LayerKind::Linear {
            in_features: channels,
            out_features: 1,
        },
        vec![pooled],
    );
}

/// Stem plus one residual stage per width, a tap after each stage
/// (`stage1`, `stage2`, ...) and a logit head.
///
/// Every stage halves height and width; even-numbered stages also halve time.
pub fn residual_net_spec(name: &str, input_dims: [usize; 3], widths: &[usize]) -> Result<ModelSpec> {
    let spatial = 1 << widths.len();
    let temporal = 1 << (widths.len() / 2);
    check_dims(input_dims, widths, spatial, temporal)?;
    let mut b = SpecBuilder::new();
    let mut x = stem(&mut b, "stem", widths[0], [1, 1, 1]);
    let mut in_ch = widths[0];
    for (i, &out_ch) in widths.iter().enumerate() {
        let st = if i % 2 == 1 { 2 } else { 1 };
        let stage = format!("stage{}", i + 1);
        x = residual_stage(&mut b, &stage, x, in_ch, out_ch, [st, 2, 2]);
        b.tap(&stage, x);
        in_ch = out_ch;
    }
    head(&mut b, x, in_ch);
    let default_tap = format!("stage{}", widths.len().min(3));
    b.finish(name, input_dims, &default_tap, OutputKind::Logit)
}

/// The four-stage decision net; localization taps `stage3` by default.
pub fn tiny_x3d_spec(input_dims: [usize; 3], widths: [usize; 4]) -> Result<ModelSpec> {
    residual_net_spec(X3D_NAME, input_dims, &widths)
}

pub fn build_tiny_x3d(input_dims: [usize; 3], widths: [usize; 4], seed: u64) -> Result<(ModelSpec, Weights<f32>)> {
    let spec = tiny_x3d_spec(input_dims, widths)?;
    let weights = Weights::he_init(&spec, seed);
    Ok((spec, weights))
}

/// Slow pathway at a quarter of the frame rate, fast pathway at full rate with
/// a quarter of the channels; fused by concatenation after stage 2 and
/// finished with a scalar regression head.
pub fn tiny_dualrate_spec(input_dims: [usize; 3], widths: [usize; 4]) -> Result<ModelSpec> {
    check_dims(input_dims, &widths, SPATIAL_STRIDE, TEMPORAL_STRIDE)?;
    let fast = |w: usize| (w / 4).max(1);
    let mut b = SpecBuilder::new();
    let slow_stem = stem(&mut b, "slow_stem", widths[0], [TEMPORAL_STRIDE, 1, 1]);
    b.tap("slow_stem", slow_stem);
    let fast_stem = stem(&mut b, "fast_stem", fast(widths[0]), [1, 1, 1]);
    b.tap("fast_stem", fast_stem);

    let s1 = residual_stage(&mut b, "slow_stage1", slow_stem, widths[0], widths[0], [1, 2, 2]);
    b.tap("slow_stage1", s1);
    let f1 = residual_stage(&mut b, "fast_stage1", fast_stem, fast(widths[0]), fast(widths[0]), [1, 2, 2]);
    b.tap("fast_stage1", f1);
    let s2 = residual_stage(&mut b, "slow_stage2", s1, widths[0], widths[1], [1, 2, 2]);
    b.tap("slow_stage2", s2);
    let f2 = residual_stage(&mut b, "fast_stage2", f1, fast(widths[0]), fast(widths[1]), [1, 2, 2]);
    b.tap("fast_stage2", f2);

    let lateral = b.conv(
        "lateral.conv",
        f2,
        ConvGeometry::cubic(fast(widths[1]), fast(widths[1]), 1, [TEMPORAL_STRIDE, 1, 1], 0),
        false,
    );
    let lateral = b.bn("lateral.bn", lateral, fast(widths[1]));
    let lateral = b.relu("lateral.out", lateral);
    let fused = b.push("fuse", LayerKind::Concat, vec![s2, lateral]);
    let fused_ch = widths[1] + fast(widths[1]);

    let s3 = residual_stage(&mut b, "stage3", fused, fused_ch, widths[2], [1, 2, 2]);
    b.tap("stage3", s3);
    let s4 = residual_stage(&mut b, "stage4", s3, widths[2], widths[3], [1, 2, 2]);
    b.tap("stage4", s4);
    head(&mut b, s4, widths[3]);
    b.finish(DUALRATE_NAME, input_dims, "slow_stage1", OutputKind::Regression)
}

pub fn build_tiny_dualrate(input_dims: [usize; 3], widths: [usize; 4], seed: u64) -> Result<(ModelSpec, Weights<f32>)> {
    let spec = tiny_dualrate_spec(input_dims, widths)?;
    let weights = Weights::he_init(&spec, seed);
    Ok((spec, weights))
}
