//! HTTP service for human-vs-computer teaching sessions.
//!
//! All routes live under `/api/v1`:
//!
//! | method | path                         | body            | reply                |
//! |--------|------------------------------|-----------------|----------------------|
//! | POST   | `/sessions`                  | `CreateSession` | 201 `BoardView`      |
//! | GET    | `/sessions`                  |                 | `[SessionSummary]`   |
//! | GET    | `/sessions/{id}`             |                 | `BoardView`          |
//! | POST   | `/sessions/{id}/moves`       | `Move`          | `MoveResponse`       |
//! | POST   | `/sessions/{id}/abort`       |                 | `BoardView`          |
//! | GET    | `/sessions/{id}/report`      |                 | `SessionReport`      |
//! | DELETE | `/sessions/{id}`             |                 | 204                  |
//! | GET    | `/rules`                     |                 | `[RuleCode]`         |
//!
//! Errors are `{"error": {"code": ..., "message": ...}}`: 422 with the rule
//! code for an illegal move, 404 for an unknown session or model, 409 when
//! it is not the human's turn, the session is finished, or another request
//! is already changing the session, and 400 for malformed requests.

pub mod sessions;
pub mod view;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use rlgame::{IllegalMove, Move};

pub use sessions::{Registry, ServiceError, Slot};
pub use view::{BoardView, CreateSession, MoveResponse, Phase, RuleCode, SessionReport, SessionSummary};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match self {
            ServiceError::UnknownSession(_) | ServiceError::UnknownModel(_) => StatusCode::NOT_FOUND,
            ServiceError::Illegal(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::NotHumanTurn | ServiceError::Complete | ServiceError::Busy => StatusCode::CONFLICT,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!("{self}");
        }
        let body = json!({ "error": { "code": self.code(), "message": self.to_string() } });
        (status, Json(body)).into_response()
    }
}

type AppState = Arc<Registry>;
type ApiResult<T> = Result<T, ServiceError>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    payload.map(|Json(v)| v).map_err(|e| ServiceError::BadRequest(e.body_text()))
}

/// Runs blocking session work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

async fn create_session(
    State(reg): State<AppState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<BoardView>)> {
    let req = body(payload)?;
    let view = blocking(move || reg.create(req)).await?;
    Ok((StatusCode::CREATED, Json((*view).clone())))
}

async fn list_sessions(State(reg): State<AppState>) -> Json<Vec<SessionSummary>> {
    Json(reg.list())
}

async fn get_session(State(reg): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<BoardView>> {
    Ok(Json((*reg.get(&id)?.view()).clone()))
}

async fn submit_move(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<Move>, JsonRejection>,
) -> ApiResult<Json<MoveResponse>> {
    let mv = body(payload)?;
    let slot = reg.get(&id)?;
    let out = blocking(move || slot.claim()?.submit(mv, reg.store())).await?;
    Ok(Json(out))
}

async fn abort_game(State(reg): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<BoardView>> {
    let slot = reg.get(&id)?;
    Ok(Json(blocking(move || slot.claim()?.abort()).await?))
}

async fn close_session(State(reg): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    blocking(move || reg.close(&id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn session_report(State(reg): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionReport>> {
    Ok(Json(blocking(move || reg.report(&id)).await?))
}

async fn rule_codes() -> Json<Vec<RuleCode>> {
    let mut codes: Vec<RuleCode> = IllegalMove::ALL
        .iter()
        .map(|r| RuleCode {
            code: r.code().into(),
            message: r.to_string(),
        })
        .collect();
    for e in [
        ServiceError::UnknownSession(String::new()),
        ServiceError::UnknownModel(String::new()),
        ServiceError::NotHumanTurn,
        ServiceError::Complete,
        ServiceError::Busy,
        ServiceError::BadRequest(String::new()),
        ServiceError::Internal(String::new()),
    ] {
        let message = match &e {
            ServiceError::UnknownSession(_) => "no such session".to_string(),
            ServiceError::UnknownModel(_) => "no such model".to_string(),
            ServiceError::BadRequest(_) => "malformed request".to_string(),
            ServiceError::Internal(_) => "server error".to_string(),
            other => other.to_string(),
        };
        codes.push(RuleCode {
            code: e.code().into(),
            message,
        });
    }
    Json(codes)
}

/// The versioned API, without static assets.
pub fn router(registry: Arc<Registry>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session).delete(close_session))
        .route("/sessions/{id}/moves", post(submit_move))
        .route("/sessions/{id}/abort", post(abort_game))
        .route("/sessions/{id}/report", get(session_report))
        .route("/rules", get(rule_codes));
    Router::new().nest("/api/v1", api).with_state(registry)
}

#[derive(Clone, Debug)]
pub struct ServeOptions {
    pub addr: SocketAddr,
    pub data_dir: PathBuf,
    /// Built browser client to serve at `/`.
    pub static_dir: Option<PathBuf>,
}

pub async fn serve(opts: ServeOptions) -> Result<(), ServiceError> {
    let registry = Arc::new(Registry::open(&opts.data_dir)?);
    let mut app = router(registry);
    if let Some(dir) = &opts.static_dir {
        app = app.fallback_service(tower_http::services::ServeDir::new(dir));
    }
    let listener = tokio::net::TcpListener::bind(opts.addr)
        .await
        .map_err(|e| ServiceError::Internal(format!("binding {}: {e}", opts.addr)))?;
    tracing::info!("listening on {}", opts.addr);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))
}
