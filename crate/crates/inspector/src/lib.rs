//! HTTP and WebSocket front end for inspector sessions.
//!
//! `/ws` gives each connection its own session. `/api/command` and
//! `/api/state` drive one shared session for clients without sockets.

use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use minicart_core::agents::AgentKind;
use minicart_core::discovery::{collect_traces, correlate, CorrelationFinding, TraceConfig, DEFAULT_MIN_SUPPORT, DEFAULT_R_THRESHOLD};
use minicart_core::inspector::{Reply, RunState, Session, SessionConfig};
use minicart_core::rng::splitmix64;
use minicart_core::{GameId, QuirkSet};
use tokio::sync::Mutex;
use tower_http::services::ServeDir;

const PLACEHOLDER_UI: &str = include_str!("placeholder.html");

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub game: GameId,
    pub seed: u64,
    pub quirks: QuirkSet,
    pub host: IpAddr,
    pub port: u16,
    /// Capability token for `set_ram`.
    pub token: Option<String>,
    /// Built UI bundle; a placeholder page is served when absent.
    pub ui_dir: Option<PathBuf>,
    /// Trace length for the correlation findings attached to command replies;
    /// zero disables them.
    pub findings_frames: usize,
}

impl ServiceConfig {
    pub fn new(game: GameId, seed: u64, port: u16) -> Self {
        ServiceConfig {
            game,
            seed,
            quirks: QuirkSet::ALL,
            host: IpAddr::from([127, 0, 0, 1]),
            port,
            token: None,
            ui_dir: None,
            findings_frames: 500,
        }
    }

    /// A token is mandatory once the service listens beyond loopback; one is
    /// generated if the caller gave none.
    pub fn ensure_token(&mut self) -> Option<&str> {
        if self.token.is_none() && !self.host.is_loopback() {
            let nanos = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_nanos() as u64);
            let a = splitmix64(nanos ^ u64::from(std::process::id()));
            self.token = Some(format!("{a:016x}{:016x}", splitmix64(a)));
        }
        self.token.as_deref()
    }

    fn session_config(&self) -> SessionConfig {
        SessionConfig {
            game: self.game,
            seed: self.seed,
            quirks: self.quirks,
            agent: AgentKind::Random,
            token: self.token.clone(),
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    config: Arc<ServiceConfig>,
    shared: Arc<Mutex<Session>>,
    findings: Arc<Option<Vec<CorrelationFinding>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        let findings = (config.findings_frames >= 2).then(|| {
            let cfg = TraceConfig {
                quirks: config.quirks,
                ..TraceConfig::new(config.game, AgentKind::Random, config.findings_frames, config.seed)
            };
            collect_traces(&cfg)
                .map(|t| correlate(&t, DEFAULT_MIN_SUPPORT, DEFAULT_R_THRESHOLD).findings)
                .unwrap_or_default()
        });
        AppState {
            shared: Arc::new(Mutex::new(Self::make_session(&config, &findings))),
            config: Arc::new(config),
            findings: Arc::new(findings),
        }
    }

    fn make_session(config: &ServiceConfig, findings: &Option<Vec<CorrelationFinding>>) -> Session {
        let mut s = Session::new(config.session_config());
        if let Some(f) = findings {
            s.set_findings(f.clone());
        }
        s
    }

    pub fn new_session(&self) -> Session {
        Self::make_session(&self.config, &self.findings)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    /// Advance the shared session while it is in run mode.
    pub fn spawn_ticker(&self) -> tokio::task::JoinHandle<()> {
        let shared = self.shared.clone();
        tokio::spawn(async move {
            loop {
                let wait = {
                    let mut s = shared.lock().await;
                    s.run_tick();
                    tick_interval(s.run_state())
                };
                tokio::time::sleep(wait.unwrap_or(Duration::from_millis(50))).await;
            }
        })
    }
}

fn tick_interval(run: RunState) -> Option<Duration> {
    match run {
        RunState::Paused => None,
        RunState::Running { ticks_per_second } => Some(Duration::from_secs_f64(1.0 / ticks_per_second)),
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/ws", get(ws_handler))
        .route("/api/state", get(get_state))
        .route("/api/command", post(post_command));
    let api = match &state.config.ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER_UI) })),
    };
    api.with_state(state)
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(axum::http::header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn get_state(State(app): State<AppState>) -> Response {
    let s = app.shared.lock().await;
    let body = serde_json::to_string(&s.state(None, true)).expect("state serializes");
    json_response(StatusCode::OK, body)
}

async fn post_command(State(app): State<AppState>, body: String) -> Response {
    let reply = app.shared.lock().await.handle_text(&body);
    let status = match reply {
        Reply::State(_) => StatusCode::OK,
        Reply::Error(_) => StatusCode::BAD_REQUEST,
    };
    json_response(status, reply.to_json())
}

async fn ws_handler(ws: WebSocketUpgrade, State(app): State<AppState>) -> Response {
    let session = app.new_session();
    ws.on_upgrade(move |socket| ws_loop(socket, session))
}

async fn send(socket: &mut WebSocket, text: String) -> bool {
    socket.send(Message::Text(text.into())).await.is_ok()
}

/// The loop owns the session, so commands and ticks are serialized.
async fn ws_loop(mut socket: WebSocket, mut session: Session) {
    let hello = serde_json::to_string(&session.state(None, true)).expect("state serializes");
    if !send(&mut socket, hello).await {
        return;
    }
    loop {
        let wait = tick_interval(session.run_state());
        tokio::select! {
            msg = socket.recv() => match msg {
                Some(Ok(Message::Text(text))) => {
                    let reply = session.handle_text(text.as_str());
                    if !send(&mut socket, reply.to_json()).await {
                        return;
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
            _ = sleep_or_pend(wait) => {
                if let Some(st) = session.run_tick() {
                    let text = serde_json::to_string(&st).expect("state serializes");
                    if !send(&mut socket, text).await {
                        return;
                    }
                }
            }
        }
    }
}

async fn sleep_or_pend(wait: Option<Duration>) {
    match wait {
        Some(d) => tokio::time::sleep(d).await,
        None => std::future::pending().await,
    }
}

/// Listen and serve until the server fails. Generates a `set_ram` token when
/// bound beyond loopback.
pub async fn serve(mut config: ServiceConfig) -> std::io::Result<()> {
    config.ensure_token();
    let (_, handle) = bind(config).await?;
    handle.await.map_err(std::io::Error::other)?
}

/// Bind the listener and start serving in the background. Port 0 picks a
/// free port, reported in the returned address.
pub async fn bind(config: ServiceConfig) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<std::io::Result<()>>)> {
    let addr = SocketAddr::new(config.host, config.port);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let state = tokio::task::spawn_blocking(move || AppState::new(config))
        .await
        .map_err(std::io::Error::other)?;
    state.spawn_ticker();
    let handle = tokio::spawn(async move { axum::serve(listener, router(state)).await });
    Ok((local, handle))
}
