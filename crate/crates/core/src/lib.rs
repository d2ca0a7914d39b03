//! Decision-model guided vessel localization for ultrasound video.
//!
//! A small 3-D residual classifier decides whether the vessel is in view; its
//! internal feature maps are then turned into a clip-aligned saliency volume
//! from which a single annotation is derived. The crate also ships Monte Carlo
//! Shapley attribution for auditing the classifier, a procedural ultrasound
//! phantom used for training and evaluation, and a WebSocket guidance service.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod eval;
pub mod localizer;
pub mod model;
pub mod phantom;
pub mod service;
pub mod shap;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
