//! In-process mock servers for the gateway's wire protocols.
//!
//! Each server answers `POST` on the protocol route of its [`MockKind`] and
//! records every request; `GET /_log` returns that record. Replies come from
//! a [`Responder`]: either a [`Script`] keyed by request fingerprint (the
//! SHA-256 of the canonical JSON body) or any closure. Requests the
//! responder does not know get a 404 that echoes their fingerprint.

pub mod replies;

use std::collections::HashMap;
use std::fmt;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

#[derive(Debug, Error)]
pub enum MockError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("script {path}: {message}")]
    Script { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MockKind {
    Stm,
    Llm,
    Scorer,
    Aligner,
    /// Token log-probability endpoint used for perplexity.
    Lm,
}

impl MockKind {
    pub fn route(self) -> &'static str {
        match self {
            MockKind::Stm => "/translate",
            MockKind::Llm => "/chat",
            MockKind::Scorer => "/score",
            MockKind::Aligner => "/align",
            MockKind::Lm => "/logprobs",
        }
    }
}

impl std::str::FromStr for MockKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stm" => Ok(MockKind::Stm),
            "llm" => Ok(MockKind::Llm),
            "scorer" => Ok(MockKind::Scorer),
            "aligner" => Ok(MockKind::Aligner),
            "lm" => Ok(MockKind::Lm),
            other => Err(format!("unknown mock kind `{other}`")),
        }
    }
}

/// Serialization with object keys sorted, so equal documents give equal bytes.
pub fn canonical_json(value: &Value) -> String {
    // serde_json's default map is ordered by key.
    serde_json::to_string(value).expect("JSON value serializes")
}

/// SHA-256 hex digest of [`canonical_json`].
pub fn fingerprint(value: &Value) -> String {
    hex::encode(Sha256::digest(canonical_json(value).as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplyBody {
    Json(Value),
    /// Sent verbatim with a JSON content type, e.g. to emit invalid JSON.
    Raw(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub status: u16,
    pub body: ReplyBody,
    pub delay: Duration,
}

impl Reply {
    pub fn json(body: Value) -> Self {
        Self::with_status(200, body)
    }

    pub fn with_status(status: u16, body: Value) -> Self {
        Self {
            status,
            body: ReplyBody::Json(body),
            delay: Duration::ZERO,
        }
    }

    pub fn raw(status: u16, body: impl Into<String>) -> Self {
        Self {
            status,
            body: ReplyBody::Raw(body.into()),
            delay: Duration::ZERO,
        }
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }
}

pub trait Responder: Send + Sync + 'static {
    /// `None` means the request is not scripted.
    fn respond(&self, request: &Value) -> Option<Reply>;
}

impl<F> Responder for F
where
    F: Fn(&Value) -> Option<Reply> + Send + Sync + 'static,
{
    fn respond(&self, request: &Value) -> Option<Reply> {
        self(request)
    }
}

#[derive(Debug, Deserialize)]
struct ScriptEntry {
    #[serde(default)]
    fingerprint: Option<String>,
    #[serde(default)]
    request: Option<Value>,
    #[serde(default = "default_status")]
    status: u16,
    #[serde(default)]
    body: Option<Value>,
    #[serde(default)]
    raw_body: Option<String>,
    #[serde(default)]
    delay_ms: u64,
}

fn default_status() -> u16 {
    200
}

#[derive(Debug, Deserialize)]
struct ScriptFile {
    entries: Vec<ScriptEntry>,
}

/// Canned replies keyed by request fingerprint.
///
/// File form: `{"entries": [{"request": {...} | "fingerprint": "hex",
/// "status": 200, "body": {...} | "raw_body": "...", "delay_ms": 0}]}`.
#[derive(Debug, Clone, Default)]
pub struct Script {
    replies: HashMap<String, Reply>,
}

impl Script {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, request: &Value, reply: Reply) -> &mut Self {
        self.replies.insert(fingerprint(request), reply);
        self
    }

    pub fn insert_fingerprint(&mut self, fingerprint: impl Into<String>, reply: Reply) -> &mut Self {
        self.replies.insert(fingerprint.into(), reply);
        self
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let file: ScriptFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut script = Script::new();
        for (i, entry) in file.entries.into_iter().enumerate() {
            let key = match (entry.fingerprint, &entry.request) {
                (Some(fp), _) => fp,
                (None, Some(request)) => fingerprint(request),
                (None, None) => return Err(format!("entry {i}: needs `fingerprint` or `request`")),
            };
            let body = match (entry.body, entry.raw_body) {
                (Some(body), None) => ReplyBody::Json(body),
                (None, Some(raw)) => ReplyBody::Raw(raw),
                (None, None) => ReplyBody::Json(Value::Null),
                (Some(_), Some(_)) => return Err(format!("entry {i}: both `body` and `raw_body` given")),
            };
            script.replies.insert(
                key,
                Reply {
                    status: entry.status,
                    body,
                    delay: Duration::from_millis(entry.delay_ms),
                },
            );
        }
        Ok(script)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MockError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|message| MockError::Script {
            path: path.display().to_string(),
            message,
        })
    }
}

impl Responder for Script {
    fn respond(&self, request: &Value) -> Option<Reply> {
        self.replies.get(&fingerprint(request)).cloned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: usize,
    pub path: String,
    pub fingerprint: String,
    pub body: Value,
    pub status: u16,
}

struct Shared {
    responder: Box<dyn Responder>,
    log: Mutex<Vec<LogEntry>>,
}

pub struct MockServer {
    kind: MockKind,
    addr: SocketAddr,
    shared: Arc<Shared>,
    shutdown: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<()>>,
}

impl fmt::Debug for MockServer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MockServer")
            .field("kind", &self.kind)
            .field("addr", &self.addr)
            .finish_non_exhaustive()
    }
}

impl MockServer {
    /// Binds `127.0.0.1:port` (0 picks a free port) and starts serving.
    pub async fn start(kind: MockKind, responder: impl Responder, port: u16) -> Result<Self, MockError> {
        Self::start_on(kind, responder, ([127, 0, 0, 1], port).into()).await
    }

    pub async fn start_on(kind: MockKind, responder: impl Responder, addr: SocketAddr) -> Result<Self, MockError> {
        let listener = TcpListener::bind(addr).await.map_err(|e| {
            if e.kind() == std::io::ErrorKind::AddrInUse {
                MockError::PortInUse(addr.port())
            } else {
                MockError::Io(e)
            }
        })?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            responder: Box::new(responder),
            log: Mutex::default(),
        });
        let app = Router::new()
            .route(kind.route(), post(handle))
            .route("/_log", get(read_log))
            .with_state(shared.clone());
        let (tx, rx) = oneshot::channel::<()>();
        let task = tokio::spawn(async move {
            let served = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
            if let Err(e) = served {
                tracing::error!(error = %e, "mock server stopped");
            }
        });
        Ok(Self {
            kind,
            addr,
            shared,
            shutdown: Some(tx),
            task: Some(task),
        })
    }

    pub fn kind(&self) -> MockKind {
        self.kind
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn log(&self) -> Vec<LogEntry> {
        self.shared.log.lock().expect("log poisoned").clone()
    }

    /// Number of protocol requests received so far.
    pub fn calls(&self) -> usize {
        self.shared.log.lock().expect("log poisoned").len()
    }

    pub fn clear_log(&self) {
        self.shared.log.lock().expect("log poisoned").clear();
    }

    /// Serves until the process is interrupted.
    pub async fn run_until_ctrl_c(mut self) -> Result<(), MockError> {
        tokio::signal::ctrl_c().await?;
        self.stop().await;
        Ok(())
    }

    pub async fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

async fn handle(State(shared): State<Arc<Shared>>, uri: axum::http::Uri, body: Bytes) -> Response {
    let parsed: Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => {
            return (
                StatusCode::BAD_REQUEST,
                Json(json!({"error": format!("request body is not JSON: {e}")})),
            )
                .into_response()
        }
    };
    let fp = fingerprint(&parsed);
    let reply = shared.responder.respond(&parsed).unwrap_or_else(|| {
        Reply::with_status(404, json!({"error": "unscripted request", "fingerprint": fp}))
    });
    {
        let mut log = shared.log.lock().expect("log poisoned");
        let seq = log.len();
        log.push(LogEntry {
            seq,
            path: uri.path().to_string(),
            fingerprint: fp,
            body: parsed,
            status: reply.status,
        });
    }
    if !reply.delay.is_zero() {
        tokio::time::sleep(reply.delay).await;
    }
    let status = StatusCode::from_u16(reply.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    match reply.body {
        ReplyBody::Json(v) => (status, Json(v)).into_response(),
        ReplyBody::Raw(s) => (status, [(header::CONTENT_TYPE, "application/json")], s).into_response(),
    }
}

async fn read_log(State(shared): State<Arc<Shared>>) -> Json<Vec<LogEntry>> {
    Json(shared.log.lock().expect("log poisoned").clone())
}
