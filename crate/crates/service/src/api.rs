//! Routes under `/v1`.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::{ServeDir, ServeFile};

use crate::error::ApiError;
use crate::model::{CreateSession, PostObservation, PostUnavailable};
use crate::state::ServiceState;

type Shared = Arc<ServiceState>;
type ApiResult = Result<Response, ApiError>;

#[derive(Debug, Deserialize)]
struct UploadQuery {
    name: Option<String>,
}

#[derive(Debug, Deserialize)]
struct SessionsQuery {
    dataset_id: Option<String>,
}

#[derive(Debug, Deserialize)]
struct TopQuery {
    top: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    version: &'static str,
}

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(v)| v)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

/// Runs a state call off the async workers; writes sync to disk.
async fn blocking<T, F>(state: Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&ServiceState) -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&state))
        .await
        .map_err(|e| ApiError::storage(format!("worker failed: {e}")))?
}

fn ok<T: Serialize>(value: T) -> ApiResult {
    Ok(Json(value).into_response())
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok",
        version: env!("CARGO_PKG_VERSION"),
    })
}

async fn upload_dataset(
    State(state): State<Shared>,
    q: Result<Query<UploadQuery>, QueryRejection>,
    body: Bytes,
) -> ApiResult {
    let name = query(q)?.name;
    let (record, created) = blocking(state, move |s| s.upload_dataset(name, &body)).await?;
    let status = if created {
        StatusCode::CREATED
    } else {
        StatusCode::OK
    };
    Ok((status, Json(record)).into_response())
}

async fn list_datasets(State(state): State<Shared>) -> ApiResult {
    ok(state.datasets())
}

async fn get_dataset(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult {
    ok(state.dataset(&id)?)
}

async fn create_session(
    State(state): State<Shared>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult {
    let req = json_body(body)?;
    let view = blocking(state, move |s| s.create_session(req)).await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn list_sessions(
    State(state): State<Shared>,
    q: Result<Query<SessionsQuery>, QueryRejection>,
) -> ApiResult {
    let q = query(q)?;
    ok(state.sessions(q.dataset_id.as_deref()))
}

async fn get_session(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult {
    ok(state.session(&id)?)
}

async fn delete_session(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult {
    blocking(state, move |s| s.delete_session(&id)).await?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn recommendations(
    State(state): State<Shared>,
    Path(id): Path<String>,
    q: Result<Query<TopQuery>, QueryRejection>,
) -> ApiResult {
    let top = query(q)?.top;
    ok(blocking(state, move |s| s.recommendations(&id, top)).await?)
}

async fn whatif(
    State(state): State<Shared>,
    Path((id, attribute)): Path<(String, String)>,
) -> ApiResult {
    ok(blocking(state, move |s| s.whatif(&id, &attribute)).await?)
}

async fn observe(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<PostObservation>, JsonRejection>,
) -> ApiResult {
    let req = json_body(body)?;
    ok(blocking(state, move |s| s.observe(&id, req)).await?)
}

async fn unavailable(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<PostUnavailable>, JsonRejection>,
) -> ApiResult {
    let req = json_body(body)?;
    ok(blocking(state, move |s| s.mark_unavailable(&id, req)).await?)
}

async fn api_not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

/// The API router, plus static files from `static_dir` for every other path.
/// Unknown paths under the static root fall back to its `index.html`.
pub fn router(state: Arc<ServiceState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/datasets", post(upload_dataset).get(list_datasets))
        .route("/datasets/{id}", get(get_dataset))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/recommendations", get(recommendations))
        .route("/sessions/{id}/whatif/{attribute}", get(whatif))
        .route("/sessions/{id}/observations", post(observe))
        .route("/sessions/{id}/unavailable", post(unavailable))
        .fallback(api_not_found)
        .with_state(state);
    let app = Router::new().nest("/v1", api);
    match static_dir {
        Some(dir) => {
            let index = ServeFile::new(dir.join("index.html"));
            app.fallback_service(ServeDir::new(dir).fallback(index))
        }
        None => app,
    }
}

/// Serves on an already bound listener until interrupted with Ctrl-C.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<ServiceState>,
    static_dir: Option<PathBuf>,
) -> std::io::Result<()> {
    axum::serve(listener, router(state, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
