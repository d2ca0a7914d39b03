use std::sync::Arc;
use std::time::Instant;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;

use crate::error::Result;
use crate::localizer::{localize, to_u8, LocalizerConfig};
use crate::model::{ModelSpec, Weights};
use crate::phantom::{render_at_pose, AnatomyMap, MaskShape, ProbePose};

use super::protocol::{AnnotationGeometry, ServerMessage};

/// Immutable model shared by every session.
#[derive(Debug)]
pub struct GuidanceModel {
    pub spec: ModelSpec,
    pub weights: Weights<f32>,
    pub localizer: LocalizerConfig,
    pub mask_shape: MaskShape,
}

impl GuidanceModel {
    pub fn new(spec: ModelSpec, weights: Weights<f32>, localizer: LocalizerConfig, mask_shape: MaskShape) -> Result<Self> {
        weights.check(&spec)?;
        localizer.validate()?;
        spec.tap_layer(&localizer.tap_name)?;
        Ok(Self {
            spec,
            weights,
            localizer,
            mask_shape,
        })
    }
}

/// One probe in one anatomy world.
#[derive(Debug)]
pub struct Session {
    pub id: u64,
    pub seed: u64,
    pub anatomy: AnatomyMap,
    pose: ProbePose,
    frame_clock: u64,
    model: Arc<GuidanceModel>,
}

impl Session {
    /// New world from `seed`, probe at the torso centre.
    pub fn open(id: u64, seed: u64, model: Arc<GuidanceModel>) -> Self {
        let anatomy = AnatomyMap::generate(seed, model.spec.input_dims, model.mask_shape);
        let pose = anatomy.bounds.center();
        Self {
            id,
            seed,
            anatomy,
            pose,
            frame_clock: 0,
            model,
        }
    }

    pub fn world(&self) -> ServerMessage {
        ServerMessage::World {
            session: self.id,
            bounds: self.anatomy.bounds,
            dims: self.anatomy.dims,
            mask: self.anatomy.mask_shape,
        }
    }

    pub fn pose(&self) -> ProbePose {
        self.pose
    }

    pub fn pose_message(&self) -> ServerMessage {
        ServerMessage::Pose {
            x: self.pose.x,
            y: self.pose.y,
            theta: self.pose.theta,
        }
    }

    /// Moves the probe and clamps it to the torso.
    pub fn apply_move(&mut self, dx: f64, dy: f64, dtheta: f64) -> ProbePose {
        let next = ProbePose {
            x: self.pose.x + dx,
            y: self.pose.y + dy,
            theta: self.pose.theta + dtheta,
        };
        self.pose = self.anatomy.bounds.clamp(next);
        self.pose
    }

    pub fn set_pose(&mut self, pose: ProbePose) {
        self.pose = self.anatomy.bounds.clamp(pose);
    }

    /// Renders the next clip at the current pose and localizes it.
    pub fn step(&mut self) -> Result<ServerMessage> {
        let started = Instant::now();
        let (clip, _) = render_at_pose(&self.anatomy, self.pose, self.frame_clock)?;
        let m = &self.model;
        let result = localize(&m.spec, &m.weights, &clip, &m.localizer)?;
        let [t, h, w] = clip.dims();
        self.frame_clock += t as u64;
        let frames = (0..t)
            .map(|i| STANDARD.encode(clip.frame(i).iter().map(|&v| to_u8(v)).collect::<Vec<u8>>()))
            .collect();
        Ok(ServerMessage::Guidance {
            frames,
            t,
            h,
            w,
            logit: result.prediction.logit,
            present: result.prediction.present,
            annotation: result.annotation.map(|a| AnnotationGeometry {
                ch: a.center_h,
                cw: a.center_w,
                r: a.radius,
            }),
            status: result.status,
            latency_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }
}
