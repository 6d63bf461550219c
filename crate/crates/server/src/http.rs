//! JSON HTTP API.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pragmachat_core::knowledge::DocFormat;
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::app::App;
use crate::error::ServiceError;
use crate::jobs::JobSpec;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::EmptyMessage => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::BackendUnavailable(_) => StatusCode::BAD_GATEWAY,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ServiceError>;

/// Runs blocking service code off the async executor.
async fn blocking<T, F>(app: &Arc<App>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&App) -> ApiResult<T> + Send + 'static,
{
    let app = app.clone();
    tokio::task::spawn_blocking(move || f(&app))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

/// Parses a JSON body, turning any rejection into a 400.
fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("invalid body: {e}")))
}

pub fn router(app: Arc<App>) -> Router {
    let cors = cors_layer(&app.config().cors_origins);
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/models", get(list_models))
        .route("/documents", get(list_documents).post(upload_document))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/chat", post(chat))
        .route("/experiments", get(list_experiments).post(submit_experiment))
        .route("/experiments/{id}", get(get_experiment))
        .route("/experiments/{id}/{artifact}", get(get_artifact))
        .layer(cors)
        .with_state(app)
}

fn cors_layer(origins: &[String]) -> CorsLayer {
    let base = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    if origins.iter().any(|o| o == "*") {
        return base.allow_origin(Any);
    }
    let list: Vec<HeaderValue> = origins.iter().filter_map(|o| o.parse().ok()).collect();
    base.allow_origin(AllowOrigin::list(list))
}

async fn list_models(State(app): State<Arc<App>>) -> ApiResult<Response> {
    let models = blocking(&app, |a| a.list_models()).await?;
    Ok(Json(models).into_response())
}

async fn list_documents(State(app): State<Arc<App>>) -> Response {
    Json(app.list_documents()).into_response()
}

#[derive(Deserialize)]
struct UploadQuery {
    title: Option<String>,
    format: Option<String>,
}

#[derive(Deserialize)]
struct UploadJson {
    title: String,
    #[serde(default)]
    format: Option<String>,
    text: String,
}

/// Either a JSON `{title, format, text}` body, or the raw file bytes with
/// `?title=...&format=txt|pdf`.
async fn upload_document(
    State(app): State<Arc<App>>,
    Query(q): Query<UploadQuery>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    let (title, format, bytes) = if is_json {
        let u: UploadJson = parse_json(&body)?;
        (u.title, u.format, u.text.into_bytes())
    } else {
        let title = q
            .title
            .ok_or_else(|| ServiceError::BadRequest("missing title".into()))?;
        (title, q.format, body.to_vec())
    };
    let format: DocFormat = format
        .as_deref()
        .unwrap_or("txt")
        .parse()
        .map_err(|e: pragmachat_core::knowledge::KnowledgeError| ServiceError::BadRequest(e.to_string()))?;
    let doc = blocking(&app, move |a| a.ingest(&bytes, format, &title)).await?;
    Ok((StatusCode::CREATED, Json(doc)).into_response())
}

async fn list_sessions(State(app): State<Arc<App>>) -> Response {
    Json(app.list_sessions()).into_response()
}

#[derive(Deserialize)]
struct NewSession {
    model: String,
    doc_id: String,
    #[serde(default)]
    include_illocutionary_force: bool,
}

async fn create_session(State(app): State<Arc<App>>, body: Bytes) -> ApiResult<Response> {
    let req: NewSession = parse_json(&body)?;
    let view = blocking(&app, move |a| {
        a.create_session(&req.model, &req.doc_id, req.include_illocutionary_force)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_session(State(app): State<Arc<App>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(app.get_session(&id)?).into_response())
}

#[derive(Deserialize)]
struct ChatRequest {
    message: String,
    #[serde(default)]
    include_illocutionary_force: Option<bool>,
}

async fn chat(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: ChatRequest = parse_json(&body)?;
    let reply = blocking(&app, move |a| {
        a.chat(&id, &req.message, req.include_illocutionary_force)
    })
    .await?;
    Ok(Json(reply).into_response())
}

async fn list_experiments(State(app): State<Arc<App>>) -> Response {
    Json(app.list_jobs()).into_response()
}

async fn submit_experiment(State(app): State<Arc<App>>, body: Bytes) -> ApiResult<Response> {
    let spec: JobSpec = parse_json(&body)?;
    let job = blocking(&app, move |a| a.submit(spec)).await?;
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "id": job.id, "status": job.status })),
    )
        .into_response())
}

async fn get_experiment(State(app): State<Arc<App>>, Path(id): Path<String>) -> ApiResult<Response> {
    let (job, results) = blocking(&app, move |a| Ok((a.get_job(&id)?, a.job_records(&id)?))).await?;
    let mut body = serde_json::to_value(&job).map_err(ServiceError::from)?;
    body["results"] = serde_json::to_value(results).map_err(ServiceError::from)?;
    Ok(Json(body).into_response())
}

async fn get_artifact(
    State(app): State<Arc<App>>,
    Path((id, artifact)): Path<(String, String)>,
) -> ApiResult<Response> {
    let content_type = if artifact.ends_with(".csv") {
        "text/csv; charset=utf-8"
    } else {
        "text/markdown; charset=utf-8"
    };
    let bytes = blocking(&app, move |a| a.artifact(&id, &artifact)).await?;
    Ok(([(header::CONTENT_TYPE, content_type)], bytes).into_response())
}
