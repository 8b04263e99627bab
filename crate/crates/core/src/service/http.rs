use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use super::{Clock, ReportId, ServiceError, SessionService};

#[derive(Clone)]
struct AppState {
    service: Arc<SessionService>,
    clock: Arc<dyn Clock>,
}

#[derive(Debug, Deserialize)]
struct SubmitBody {
    source: String,
    tests_passed: bool,
}

#[derive(Debug, Default, Deserialize)]
struct ViewBody {
    student_id: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RatingBody {
    helpful: bool,
    student_id: Option<String>,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let message = self.to_string();
        let (status, body) = match &self {
            ServiceError::EmptySource => (StatusCode::BAD_REQUEST, json!({ "error": "empty_source" })),
            ServiceError::GateClosed => (StatusCode::FORBIDDEN, json!({ "error": "gate_closed" })),
            ServiceError::CooldownActive { remaining_seconds } => (
                StatusCode::TOO_MANY_REQUESTS,
                json!({ "error": "cooldown_active", "remaining_seconds": remaining_seconds }),
            ),
            ServiceError::Syntax(e) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "syntax_error", "line": e.line, "detail": e.message }),
            ),
            ServiceError::UnknownSession => (StatusCode::NOT_FOUND, json!({ "error": "unknown_session" })),
            ServiceError::UnknownReport => (StatusCode::NOT_FOUND, json!({ "error": "unknown_report" })),
            ServiceError::NotVisible { visible_from } => {
                (StatusCode::CONFLICT, json!({ "error": "not_visible", "visible_from": visible_from }))
            }
            ServiceError::Storage(_) | ServiceError::Pipeline(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": "internal" }))
            }
        };
        let mut body = body;
        body["message"] = json!(message);
        let mut resp = (status, Json(body)).into_response();
        if let ServiceError::CooldownActive { remaining_seconds } = self {
            resp.headers_mut().insert(header::RETRY_AFTER, HeaderValue::from(remaining_seconds));
        }
        resp
    }
}

/// Runs blocking service work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Pipeline(e.to_string()))?
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn submit(
    State(app): State<AppState>,
    Path((sid, pid)): Path<(String, String)>,
    Json(body): Json<SubmitBody>,
) -> Result<Response, ServiceError> {
    let now = app.clock.now();
    let accepted = blocking(move || {
        app.service.request_style_feedback(&sid, &pid, &body.source, body.tests_passed, now)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(accepted)).into_response())
}

async fn snapshot(
    State(app): State<AppState>,
    Path((sid, pid)): Path<(String, String)>,
    Json(body): Json<SubmitBody>,
) -> Result<StatusCode, ServiceError> {
    let now = app.clock.now();
    blocking(move || app.service.record_snapshot(&sid, &pid, &body.source, body.tests_passed, now)).await?;
    Ok(StatusCode::ACCEPTED)
}

async fn reports(
    State(app): State<AppState>,
    Path((sid, pid)): Path<(String, String)>,
) -> Result<Response, ServiceError> {
    let now = app.clock.now();
    let visible = blocking(move || app.service.get_visible_reports(&sid, &pid, now)).await?;
    Ok(Json(visible).into_response())
}

async fn view(
    State(app): State<AppState>,
    Path(rid): Path<String>,
    body: Option<Json<ViewBody>>,
) -> Result<Json<serde_json::Value>, ServiceError> {
    let now = app.clock.now();
    let student = body.and_then(|Json(b)| b.student_id);
    blocking(move || app.service.record_view(&ReportId(rid), student.as_deref(), now)).await?;
    Ok(Json(json!({ "ok": true })))
}

async fn rating(
    State(app): State<AppState>,
    Path(rid): Path<String>,
    Json(body): Json<RatingBody>,
) -> Result<Json<serde_json::Value>, ServiceError> {
    let now = app.clock.now();
    let service = app.service.clone();
    blocking(move || service.record_rating(&ReportId(rid), body.student_id.as_deref(), body.helpful, now)).await?;
    Ok(Json(json!({ "ok": true, "summary": app.service.ratings_summary() })))
}

/// The HTTP API over a shared service and clock.
pub fn router(service: Arc<SessionService>, clock: Arc<dyn Clock>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions/{sid}/problems/{pid}/feedback", post(submit))
        .route("/sessions/{sid}/problems/{pid}/snapshots", post(snapshot))
        .route("/sessions/{sid}/problems/{pid}/reports", get(reports))
        .route("/reports/{rid}/view", post(view))
        .route("/reports/{rid}/rating", post(rating))
        .with_state(AppState { service, clock })
}
