//! HTTP front end: lookalike retrieval, ranking-task dispensing and
//! append-only collection of worker rankings.
//!
//! | route | |
//! |---|---|
//! | `GET /health` | liveness |
//! | `GET /lookalike/{item_id}?k=K` | nearest other-identity items |
//! | `GET /tasks/next?worker_id=W` | next task for a worker, 204 when none remain |
//! | `POST /tasks/{task_id}/rankings` | store `{worker_id, order}` |
//!
//! Anything else is looked up in the static directory, if one is configured.

mod state;

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use lookalike_core::{Error, RankingTask};

pub use state::{AppState, ServiceConfig, Submit, DEFAULT_QUOTA};

pub const DEFAULT_K: usize = 6;
pub const MAX_K: usize = 100;

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: msg.into() })).into_response()
}

/// A task as sent to a worker: the stored record plus the candidate ids in
/// on-screen order.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct TaskView {
    #[serde(flatten)]
    pub task: RankingTask,
    pub presented: Vec<String>,
}

impl From<&RankingTask> for TaskView {
    fn from(task: &RankingTask) -> Self {
        Self {
            presented: task.presented().into_iter().map(String::from).collect(),
            task: task.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct RankingBody {
    pub worker_id: String,
    pub order: Vec<String>,
}

pub fn router(state: Arc<AppState>, static_dir: Option<&std::path::Path>) -> Router {
    let app = Router::new()
        .route("/health", get(health))
        .route("/lookalike/{item_id}", get(lookalike))
        .route("/tasks/next", get(next_task))
        .route("/tasks/{task_id}/rankings", post(submit_ranking))
        .with_state(state);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

/// Binds and serves until ctrl-c.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::load(&config).map_err(std::io::Error::other)?;
    let app = router(Arc::new(state), config.static_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health() -> &'static str {
    "ok"
}

async fn lookalike(
    State(state): State<Arc<AppState>>,
    Path(item_id): Path<String>,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    let k = match params.get("k") {
        None => DEFAULT_K,
        Some(raw) => match raw.parse::<usize>() {
            Ok(k) if (1..=MAX_K).contains(&k) => k,
            _ => return error(StatusCode::BAD_REQUEST, format!("k must be an integer in 1..={MAX_K}")),
        },
    };
    match state.embeddings().top_k_similar(&item_id, k, true) {
        Ok(hits) => Json(hits).into_response(),
        Err(Error::NotFound(id)) => error(StatusCode::NOT_FOUND, format!("unknown item `{id}`")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn next_task(
    State(state): State<Arc<AppState>>,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    let worker = match params.get("worker_id").map(|w| w.trim()) {
        Some(w) if !w.is_empty() => w,
        _ => return error(StatusCode::BAD_REQUEST, "worker_id is required"),
    };
    match state.next_task(worker) {
        Some(task) => Json(TaskView::from(task)).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn submit_ranking(
    State(state): State<Arc<AppState>>,
    Path(task_id): Path<String>,
    body: Result<Json<RankingBody>, JsonRejection>,
) -> Response {
    let Json(body) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    match state.submit(&task_id, body.worker_id, body.order) {
        Ok(Submit::Accepted(record)) => (StatusCode::CREATED, Json(record)).into_response(),
        Ok(Submit::UnknownTask) => error(StatusCode::NOT_FOUND, format!("unknown task `{task_id}`")),
        Ok(Submit::Invalid(msg)) => error(StatusCode::BAD_REQUEST, msg),
        Ok(Submit::Duplicate) => error(
            StatusCode::CONFLICT,
            format!("ranking for task `{task_id}` already submitted by this worker"),
        ),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}
