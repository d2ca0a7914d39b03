//! JSON text messages exchanged over the guidance WebSocket.

use serde::{Deserialize, Serialize};

use crate::localizer::LocalizationStatus;
use crate::phantom::{MaskShape, TorsoBounds};

/// Longest accepted client message, in bytes.
pub const MAX_MESSAGE_BYTES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Open {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Move {
        dx: f64,
        dy: f64,
        dtheta: f64,
    },
    Step {},
    Close {},
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationGeometry {
    pub ch: f64,
    pub cw: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Not valid JSON or not a known message.
    BadRequest,
    /// Message exceeds [`MAX_MESSAGE_BYTES`] or is not text.
    Protocol,
    /// No open session for a message that needs one.
    Session,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServerMessage {
    World {
        session: u64,
        bounds: TorsoBounds,
        dims: [usize; 3],
        mask: MaskShape,
    },
    Pose {
        x: f64,
        y: f64,
        theta: f64,
    },
    Guidance {
        /// Base64 of raw 8-bit grayscale, row-major, one entry per frame.
        frames: Vec<String>,
        t: usize,
        h: usize,
        w: usize,
        logit: f64,
        present: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        annotation: Option<AnnotationGeometry>,
        status: LocalizationStatus,
        latency_ms: f64,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl ServerMessage {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            code,
            message: message.into(),
        }
    }
}

/// JSON Schema (draft 2020-12) for every server-to-client packet.
pub const SERVER_PACKET_SCHEMA: &str = include_str!("server_packet.schema.json");
