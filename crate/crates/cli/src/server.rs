//! HTTP API over the session engine.
//!
//! | method | path                       | body                      |
//! |--------|----------------------------|---------------------------|
//! | GET    | /tasks                     |                           |
//! | POST   | /sessions                  | `{task_id, arm?, seed?}`  |
//! | POST   | /sessions/{id}/utterance   | `{text}`                  |
//! | GET    | /sessions/{id}             |                           |
//! | POST   | /sessions/{id}/rating      | `{value}`                 |
//!
//! Static files under `/ui` when a UI directory is configured.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use anyhow::Context;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use curio_core::config::ExperimentConfig;
use curio_core::lab::{assign_arm, Arm, EventWriter};
use curio_core::session::{Engine, JournalRecord, Phase, SessionError, SessionState, SessionSummary, UserIntent};
use curio_core::Domain;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::resources::TaskMap;

struct Live {
    state: SessionState,
    last_seen: Instant,
}

pub struct AppState {
    engine: Engine,
    tasks: TaskMap,
    experiment: ExperimentConfig,
    idle: Duration,
    sessions: Mutex<HashMap<String, Arc<Mutex<Live>>>>,
    events: Option<Mutex<EventWriter<File>>>,
    journal: Option<Mutex<File>>,
}

#[derive(Debug, Default, Clone)]
pub struct ServerOptions {
    /// Experiment event log (JSONL, appended).
    pub events: Option<PathBuf>,
    /// Session journal (JSONL, appended). Replayed on start-up.
    pub journal: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
}

fn append_file(p: &Path) -> anyhow::Result<File> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(p)
        .with_context(|| format!("opening {}", p.display()))
}

impl AppState {
    pub fn new(engine: Engine, tasks: TaskMap, opts: &ServerOptions) -> anyhow::Result<Arc<Self>> {
        let cfg = engine.config().clone();
        let mut sessions = HashMap::new();
        if let Some(j) = &opts.journal {
            if j.exists() {
                let records = read_journal(j)?;
                let now = Instant::now();
                for (id, state) in engine.recover(&records, &tasks)? {
                    sessions.insert(id, Arc::new(Mutex::new(Live { state, last_seen: now })));
                }
                tracing::info!(sessions = sessions.len(), "recovered sessions from journal");
            }
        }
        Ok(Arc::new(AppState {
            engine,
            tasks,
            experiment: cfg.experiment,
            idle: Duration::from_secs(cfg.session.idle_timeout_secs),
            sessions: Mutex::new(sessions),
            events: opts.events.as_deref().map(append_file).transpose()?.map(|f| Mutex::new(EventWriter::new(f))),
            journal: opts.journal.as_deref().map(append_file).transpose()?.map(Mutex::new),
        }))
    }

    fn journal(&self, rec: &JournalRecord) {
        if let Some(j) = &self.journal {
            let line = serde_json::to_string(rec).expect("journal records serialize");
            let mut f = j.lock().unwrap();
            if let Err(e) = writeln!(f, "{line}") {
                tracing::error!(error = %e, "journal write failed");
            }
        }
    }

    fn log(&self, events: &[curio_core::lab::ExperimentEvent]) {
        if let Some(w) = &self.events {
            if let Err(e) = w.lock().unwrap().append_all(events) {
                tracing::error!(error = %e, "event log write failed");
            }
        }
    }

    /// Drops sessions idle for longer than the configured timeout.
    pub fn expire_idle(&self, now: Instant) -> usize {
        let mut map = self.sessions.lock().unwrap();
        let before = map.len();
        map.retain(|_, live| {
            let live = live.lock().unwrap();
            now.saturating_duration_since(live.last_seen) < self.idle
        });
        before - map.len()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    fn lookup(&self, id: &str) -> Result<Arc<Mutex<Live>>, ApiError> {
        self.expire_idle(Instant::now());
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no session `{id}`")))
    }
}

fn read_journal(p: &Path) -> anyhow::Result<Vec<JournalRecord>> {
    let f = File::open(p)?;
    let mut out = vec![];
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(r) => out.push(r),
            // a torn final line after a crash is expected; anything else is not
            Err(e) => tracing::warn!(line = i + 1, error = %e, "skipping unreadable journal line"),
        }
    }
    Ok(out)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::IllegalIntent { .. } => StatusCode::CONFLICT,
            SessionError::InvalidRating(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::UnknownTask(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TaskInfo {
    pub id: String,
    pub title: String,
    pub domain: Domain,
    pub n_steps: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateSession {
    pub task_id: String,
    #[serde(default)]
    pub arm: Option<Arm>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub arm: Arm,
    pub response: String,
    pub phase: Phase,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Utterance {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Rating {
    pub value: u8,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Reply {
    pub response: String,
    pub phase: Phase,
    pub step: Option<u32>,
    pub offer_pending: bool,
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn list_tasks(State(app): State<Arc<AppState>>) -> Json<Vec<TaskInfo>> {
    Json(
        app.tasks
            .values()
            .map(|t| TaskInfo {
                id: t.id.clone(),
                title: t.title.clone(),
                domain: t.domain,
                n_steps: t.n_steps,
            })
            .collect(),
    )
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let created = blocking(move || {
        let task = app
            .tasks
            .get(&req.task_id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown task `{}`", req.task_id)))?;
        let uuid = uuid::Uuid::new_v4();
        let session_id = uuid.to_string();
        let arm = req
            .arm
            .unwrap_or_else(|| assign_arm(&session_id, app.experiment.split, &app.experiment.salt));
        let seed = req.seed.unwrap_or(uuid.as_u64_pair().0);
        let state = app.engine.create_session(session_id.clone(), task.clone(), arm, seed)?;
        let response = app.engine.greeting(&state);
        app.journal(&JournalRecord::Create {
            session_id: session_id.clone(),
            task_id: task.id.clone(),
            arm,
            seed,
        });
        let phase = state.phase;
        app.sessions.lock().unwrap().insert(
            session_id.clone(),
            Arc::new(Mutex::new(Live {
                state,
                last_seen: Instant::now(),
            })),
        );
        tracing::info!(%session_id, task = %task.id, %arm, "session created");
        Ok(Created {
            session_id,
            arm,
            response,
            phase,
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(created)))
}

fn apply(app: &AppState, id: &str, intent: UserIntent) -> Result<Reply, ApiError> {
    let live = app.lookup(id)?;
    // one writer per session
    let mut live = live.lock().unwrap();
    live.last_seen = Instant::now();
    let turn = app.engine.handle(&mut live.state, intent)?;
    app.journal(&JournalRecord::Intent {
        session_id: id.to_string(),
        intent,
    });
    app.log(&turn.events);
    let s = &live.state;
    Ok(Reply {
        response: turn.response,
        phase: s.phase,
        step: s.step(),
        offer_pending: s.offer_pending(),
    })
}

async fn utterance(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<Utterance>,
) -> Result<Json<Reply>, ApiError> {
    let intent = UserIntent::parse(&req.text);
    blocking(move || apply(&app, &id, intent)).await.map(Json)
}

async fn rating(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<Rating>,
) -> Result<Json<Reply>, ApiError> {
    if !(1..=5).contains(&req.value) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("rating must be between 1 and 5, got {}", req.value),
        ));
    }
    blocking(move || apply(&app, &id, UserIntent::Rate(req.value))).await.map(Json)
}

async fn summary(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionSummary>, ApiError> {
    let live = app.lookup(&id)?;
    let s = live.lock().unwrap().state.summary();
    Ok(Json(s))
}

pub fn router(app: Arc<AppState>, ui_dir: Option<&Path>) -> Router {
    let mut r = Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/tasks", get(list_tasks))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(summary))
        .route("/sessions/{id}/utterance", post(utterance))
        .route("/sessions/{id}/rating", post(rating));
    if let Some(dir) = ui_dir {
        r = r.nest_service("/ui", ServeDir::new(dir));
    }
    r.with_state(app)
}

/// Serves until ctrl-c, sweeping idle sessions once a minute.
pub async fn serve(app: Arc<AppState>, addr: &str, ui_dir: Option<&Path>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    let sweeper = app.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            let n = sweeper.expire_idle(Instant::now());
            if n > 0 {
                tracing::info!(expired = n, "expired idle sessions");
            }
        }
    });
    axum::serve(listener, router(app, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
