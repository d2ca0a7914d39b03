//! WebSocket guidance server: one probe session per connection, clips
//! rendered at the probe pose and localized on every `step`.

mod protocol;
mod session;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::error::{Error, Result};

pub use protocol::{
    AnnotationGeometry, ClientMessage, ErrorCode, ServerMessage, MAX_MESSAGE_BYTES, SERVER_PACKET_SCHEMA,
};
pub use session::{GuidanceModel, Session};

pub const DEFAULT_BIND: &str = "127.0.0.1:8765";
pub const WS_PATH: &str = "/ws";
/// Transport-level cap; anything between this and [`MAX_MESSAGE_BYTES`] gets
/// a protocol error reply instead of a dropped connection.
const TRANSPORT_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServeConfig {
    pub bind: String,
    /// Directory served at `/` (the browser client), if any.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            bind: DEFAULT_BIND.into(),
            ui_dir: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AppState {
    model: Arc<GuidanceModel>,
    next_session: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(model: GuidanceModel) -> Self {
        Self {
            model: Arc::new(model),
            next_session: Arc::new(AtomicU64::new(1)),
        }
    }
}

pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let r = Router::new().route(WS_PATH, get(ws_handler)).with_state(state);
    match ui_dir {
        Some(dir) => r.fallback_service(ServeDir::new(dir)),
        None => r,
    }
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.max_message_size(TRANSPORT_LIMIT)
        .on_upgrade(move |socket| connection(socket, state))
}

async fn send(socket: &mut WebSocket, msg: &ServerMessage) -> bool {
    match serde_json::to_string(msg) {
        Ok(text) => socket.send(Message::Text(text.into())).await.is_ok(),
        Err(_) => false,
    }
}

/// Handles one client; messages are processed strictly in arrival order.
async fn connection(mut socket: WebSocket, state: AppState) {
    let mut session: Option<Session> = None;
    while let Some(Ok(msg)) = socket.recv().await {
        let text = match msg {
            Message::Text(t) => t,
            Message::Binary(_) => {
                if !send(&mut socket, &ServerMessage::error(ErrorCode::Protocol, "binary messages are not supported")).await {
                    break;
                }
                continue;
            }
            Message::Close(_) => break,
            _ => continue,
        };
        if text.len() > MAX_MESSAGE_BYTES {
            let err = ServerMessage::error(
                ErrorCode::Protocol,
                format!("message of {} bytes exceeds {MAX_MESSAGE_BYTES}", text.len()),
            );
            if !send(&mut socket, &err).await {
                break;
            }
            continue;
        }
        let parsed: ClientMessage = match serde_json::from_str(text.as_str()) {
            Ok(m) => m,
            Err(e) => {
                if !send(&mut socket, &ServerMessage::error(ErrorCode::BadRequest, e.to_string())).await {
                    break;
                }
                continue;
            }
        };
        let replies = match parsed {
            ClientMessage::Open { seed } => {
                let id = state.next_session.fetch_add(1, Ordering::Relaxed);
                let seed = seed.unwrap_or_else(rand::random);
                let s = Session::open(id, seed, state.model.clone());
                tracing::info!(session = id, seed, "session opened");
                let out = vec![s.world(), s.pose_message()];
                session = Some(s);
                out
            }
            ClientMessage::Move { dx, dy, dtheta } => match session.as_mut() {
                Some(s) => {
                    s.apply_move(dx, dy, dtheta);
                    vec![s.pose_message()]
                }
                None => vec![no_session()],
            },
            ClientMessage::Step {} => match session.take() {
                Some(mut s) => {
                    let joined = tokio::task::spawn_blocking(move || {
                        let r = s.step();
                        (s, r)
                    })
                    .await;
                    match joined {
                        Ok((s, r)) => {
                            session = Some(s);
                            vec![r.unwrap_or_else(|e| ServerMessage::error(ErrorCode::Internal, e.to_string()))]
                        }
                        Err(e) => vec![ServerMessage::error(ErrorCode::Internal, e.to_string())],
                    }
                }
                None => vec![no_session()],
            },
            ClientMessage::Close {} => {
                if let Some(s) = session.take() {
                    tracing::info!(session = s.id, "session closed");
                }
                let _ = socket.send(Message::Close(None)).await;
                break;
            }
        };
        for r in &replies {
            if !send(&mut socket, r).await {
                return;
            }
        }
    }
}

fn no_session() -> ServerMessage {
    ServerMessage::error(ErrorCode::Session, Error::Session("no open session; send `open` first".into()).to_string())
}

/// Serves on an already-bound listener until the task is dropped.
pub async fn serve_on(listener: tokio::net::TcpListener, state: AppState, ui_dir: Option<PathBuf>) -> Result<()> {
    let addr = listener.local_addr().map_err(|e| Error::io("listener", e))?;
    tracing::info!(%addr, "guidance service listening on ws://{addr}{WS_PATH}");
    axum::serve(listener, router(state, ui_dir))
        .await
        .map_err(|e| Error::io(addr.to_string(), e))
}

pub async fn serve(config: &ServeConfig, model: GuidanceModel) -> Result<()> {
    let addr: SocketAddr = config
        .bind
        .parse()
        .map_err(|e| Error::Config(format!("bad bind address `{}`: {e}", config.bind)))?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(addr.to_string(), e))?;
    serve_on(listener, AppState::new(model), config.ui_dir.clone()).await
}
