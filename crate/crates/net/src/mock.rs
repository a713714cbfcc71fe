//! Simulator-backed mock of a streaming chat-completions endpoint.
//!
//! Each request is simulated alone on an idle engine: the prompt's word
//! count is the prompt length and `max_tokens` the output length. The
//! resulting token events are replayed over SSE, with every offset
//! multiplied by `time_scale` (zero streams everything at once).

use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::Router;
use futures::stream;
use infermeter_core::model::RequestSpec;
use infermeter_core::sim::{simulate_isolated, PolicyConfig};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tokio::time::Instant;

use crate::protocol::{
    parse_chat_request, ChatChunk, ChatRequest, ChunkChoice, Delta, ErrorBody, ErrorDetail, Usage,
    COMPLETIONS_PATH,
};

/// Output length used when a request omits `max_tokens`.
pub const DEFAULT_MAX_TOKENS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MockOptions {
    pub time_scale: f64,
    /// Replace simulated decode timing with one token every this many
    /// seconds after the first.
    #[serde(default)]
    pub fixed_token_interval_s: Option<f64>,
    /// Omit usage from stream chunks, as many providers do.
    #[serde(default)]
    pub omit_usage: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for MockOptions {
    fn default() -> Self {
        Self {
            time_scale: 1.0,
            fixed_token_interval_s: None,
            omit_usage: false,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MockError {
    #[error("invalid mock configuration: {0}")]
    Config(String),
    #[error("failed to bind: {0}")]
    Bind(#[from] std::io::Error),
}

struct Shared {
    cfg: PolicyConfig,
    opts: MockOptions,
    next_id: AtomicU64,
}

/// A running mock server. Dropping the handle leaves it running; call
/// [`MockHandle::shutdown`] to stop it.
pub struct MockHandle {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<()>,
}

impl MockHandle {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        let _ = self.task.await;
    }

    /// Waits until the server exits on its own.
    pub async fn wait(self) {
        let _ = self.task.await;
    }
}

pub fn router(cfg: PolicyConfig, opts: MockOptions) -> Router {
    let shared = Arc::new(Shared {
        cfg,
        opts,
        next_id: AtomicU64::new(0),
    });
    Router::new()
        .route(COMPLETIONS_PATH, post(completions))
        .with_state(shared)
}

pub async fn serve_mock(
    cfg: PolicyConfig,
    bind: SocketAddr,
    opts: MockOptions,
) -> Result<MockHandle, MockError> {
    cfg.validate()
        .map_err(|e| MockError::Config(e.to_string()))?;
    if !(opts.time_scale >= 0.0 && opts.time_scale.is_finite()) {
        return Err(MockError::Config(format!(
            "time_scale must be >= 0, got {}",
            opts.time_scale
        )));
    }
    if let Some(dt) = opts.fixed_token_interval_s {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(MockError::Config(format!(
                "token interval must be >= 0, got {dt}"
            )));
        }
    }
    let listener = TcpListener::bind(bind).await?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(cfg, opts);
    let task = tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
    });
    Ok(MockHandle {
        addr,
        stop: Some(tx),
        task,
    })
}

fn error_response(status: StatusCode, message: String) -> Response {
    let body = ErrorBody {
        error: ErrorDetail {
            message,
            kind: "invalid_request_error".into(),
        },
    };
    (status, axum::Json(body)).into_response()
}

/// Event offsets from submission and the token count of each.
fn plan(shared: &Shared, req: &ChatRequest, id: u64) -> Result<Vec<(f64, u32)>, String> {
    let spec = RequestSpec::new(
        id,
        0.0,
        req.prompt_words().max(1),
        req.max_tokens.unwrap_or(DEFAULT_MAX_TOKENS),
    );
    let t = simulate_isolated(&spec, &shared.cfg, shared.opts.seed.wrapping_add(id))
        .map_err(|e| e.to_string())?;
    let events: Vec<(f64, u32)> = t
        .token_times
        .iter()
        .copied()
        .zip(t.tokens_per_event.iter().copied())
        .collect();
    Ok(match shared.opts.fixed_token_interval_s {
        Some(dt) => {
            let first = events.first().map_or(0.0, |e| e.0);
            (0..spec.decode_tokens)
                .map(|i| (first + dt * i as f64, 1))
                .collect()
        }
        None => events,
    })
}

fn sse_data(json: &str) -> Bytes {
    Bytes::from(format!("data: {json}\n\n"))
}

async fn completions(State(shared): State<Arc<Shared>>, body: Bytes) -> Response {
    let received = Instant::now();
    let req = match parse_chat_request(&body) {
        Ok(r) => r,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, e),
    };
    let id = shared.next_id.fetch_add(1, Ordering::Relaxed);
    let events = match plan(&shared, &req, id) {
        Ok(e) => e,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, e),
    };
    let total: u64 = events.iter().map(|e| u64::from(e.1)).sum();
    let prompt_tokens = req.prompt_words();
    let chunk_id = format!("cmpl-mock-{id}");

    if !req.stream {
        let text = vec!["tok"; total as usize].join(" ");
        let body = serde_json::json!({
            "id": chunk_id,
            "object": "chat.completion",
            "model": req.model,
            "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "length"}],
            "usage": {"prompt_tokens": prompt_tokens, "completion_tokens": total},
        });
        return axum::Json(body).into_response();
    }

    let scale = shared.opts.time_scale;
    let with_usage = !shared.opts.omit_usage;
    let n = events.len();
    let events = Arc::new(events);
    let state = (0usize, 0u64);
    let frames = stream::unfold(state, move |(i, emitted)| {
        let events = Arc::clone(&events);
        let chunk_id = chunk_id.clone();
        let model = req.model.clone();
        async move {
            if i > n {
                return None;
            }
            if i == n {
                return Some((Ok::<_, Infallible>(sse_data("[DONE]")), (i + 1, emitted)));
            }
            let (offset, k) = events[i];
            if scale > 0.0 {
                tokio::time::sleep_until(received + Duration::from_secs_f64(offset * scale)).await;
            }
            let emitted = emitted + u64::from(k);
            let content = vec!["tok"; k as usize].join(" ");
            let chunk = ChatChunk {
                id: chunk_id,
                object: "chat.completion.chunk".into(),
                model,
                choices: vec![ChunkChoice {
                    index: 0,
                    delta: Delta {
                        role: (i == 0).then(|| "assistant".to_string()),
                        content: Some(content),
                    },
                    finish_reason: (i + 1 == n).then(|| "length".to_string()),
                }],
                usage: with_usage.then_some(Usage {
                    prompt_tokens,
                    completion_tokens: emitted,
                }),
            };
            let json = serde_json::to_string(&chunk).expect("chunk serializes");
            Some((Ok(sse_data(&json)), (i + 1, emitted)))
        }
    });
    Response::builder()
        .status(StatusCode::OK)
        .header(header::CONTENT_TYPE, "text/event-stream")
        .header(header::CACHE_CONTROL, "no-cache")
        .body(Body::from_stream(frames))
        .expect("static response parts")
}
