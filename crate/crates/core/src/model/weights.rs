use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::Real;

use super::spec::{LayerKind, ModelSpec, ParamDecl, ParamRole};

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

/// Parameter blocks in [`ModelSpec::param_decls`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T> {
    pub blocks: Vec<ParamBlock<T>>,
}

impl<T: Real> Weights<T> {
    /// All-zero blocks shaped like the spec's declarations.
    pub fn zeros_like(spec: &ModelSpec) -> Self {
        Self {
            blocks: spec
                .param_decls()
                .into_iter()
                .map(|d| ParamBlock {
                    data: vec![T::zero(); d.len()],
                    name: d.name,
                    shape: d.shape,
                })
                .collect(),
        }
    }

    /// He-normal convolution and head weights; batch norm starts as identity.
    ///
    /// Each block draws from its own ChaCha stream, so the result depends only
    /// on `(spec, seed)`.
    pub fn he_init(spec: &ModelSpec, seed: u64) -> Self {
        let mut w = Self::zeros_like(spec);
        for (i, (decl, block)) in spec.param_decls().iter().zip(&mut w.blocks).enumerate() {
            let fan_in = match (&spec.layers[decl.layer].kind, decl.role) {
                (LayerKind::Conv { geometry, .. }, ParamRole::Weight) => Some(geometry.patch_len()),
                (LayerKind::Linear { in_features, .. }, ParamRole::Weight) => Some(*in_features),
                _ => None,
            };
            match (fan_in, decl.role) {
                (Some(fan_in), _) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(i as u64);
                    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
                    for x in &mut block.data {
                        *x = T::lit(normal.sample(&mut rng));
                    }
                }
                (None, ParamRole::Gamma | ParamRole::RunningVar) => block.data.fill(T::one()),
                _ => {}
            }
        }
        w
    }

    pub fn cast<U: Real>(&self) -> Weights<U> {
        Weights {
            blocks: self
                .blocks
                .iter()
                .map(|b| ParamBlock {
                    name: b.name.clone(),
                    shape: b.shape.clone(),
                    data: b.data.iter().map(|&x| U::lit(x.as_f64())).collect(),
                })
                .collect(),
        }
    }

    /// Checks the blocks line up with `spec` and hold finite values.
    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        let decls = spec.param_decls();
        if decls.len() != self.blocks.len() {
            return Err(Error::dim("parameter_blocks", decls.len(), self.blocks.len()));
        }
        for (d, b) in decls.iter().zip(&self.blocks) {
            check_block(d, b)?;
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&ParamBlock<T>> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::UnknownParam(name.to_owned()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut ParamBlock<T>> {
        self.blocks
            .iter_mut()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::UnknownParam(name.to_owned()))
    }

    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(|b| b.data.len()).sum()
    }

    /// Euclidean norm over every block.
    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.data.iter())
            .map(|x| x.as_f64().powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

fn check_block<T: Real>(d: &ParamDecl, b: &ParamBlock<T>) -> Result<()> {
    if d.name != b.name {
        return Err(Error::Validation(format!(
            "parameter order mismatch: expected `{}`, found `{}`",
            d.name, b.name
        )));
    }
    if d.shape != b.shape || b.data.len() != d.len() {
        return Err(Error::dim(format!("{}.len", d.name), d.len(), b.data.len()));
    }
    if b.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation(format!("parameter `{}` is not finite", d.name)));
    }
    if d.role == ParamRole::RunningVar && b.data.iter().any(|&x| x < T::zero()) {
        return Err(Error::Validation(format!("parameter `{}` is negative", d.name)));
    }
    Ok(())
}
