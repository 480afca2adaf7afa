//! HTTP routes. Field-exact request and response schemas are in `API.md`.

use std::sync::Arc;

use attnlit::attention_map::Answer;
use attnlit::dataset::{StudyConfig, TestKind};
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::error::CaptureError;
use crate::store::{ClickIn, OpenRequest, Store};

/// The study configuration as sent to clients: no answer key, no regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientConfig {
    pub study_id: String,
    pub bubble_radius: f64,
    pub blur_preview_sigma: f64,
    pub items: Vec<ClientItem>,
    pub sgl_items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientItem {
    pub code: String,
    pub test: TestKind,
    pub image_url: String,
    pub width: u32,
    pub height: u32,
    pub question: String,
    pub choices: Vec<String>,
    pub time_limit_s: f64,
}

impl ClientConfig {
    pub fn from_study(cfg: &StudyConfig) -> Self {
        ClientConfig {
            study_id: cfg.study_id.clone(),
            bubble_radius: cfg.bubble_radius,
            blur_preview_sigma: cfg.blur_preview_sigma,
            items: cfg
                .items
                .iter()
                .map(|i| ClientItem {
                    code: i.code.clone(),
                    test: i.test,
                    image_url: format!("/charts/{}.png", i.code),
                    width: i.width,
                    height: i.height,
                    question: i.question.clone(),
                    choices: i.choices.clone(),
                    time_limit_s: cfg.time_limit(i),
                })
                .collect(),
            sgl_items: cfg.sgl_items.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRequest {
    pub item: String,
    pub choice: Answer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl CaptureError {
    pub fn status(&self) -> StatusCode {
        use CaptureError::*;
        match self {
            UnknownSession | ChartNotFound(_) => StatusCode::NOT_FOUND,
            SessionFinalized
            | ParticipantDone(_)
            | BacktrackRejected { .. }
            | ItemNotCurrent { .. }
            | NoCurrentItem
            | TimeExpired { .. }
            | SglNotReady
            | SglAlreadyRecorded => StatusCode::CONFLICT,
            InvalidParticipant(_) | UnknownItem(_) | InvalidChoice { .. } | InvalidClick { .. } | InvalidSgl(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            InvalidRequest(_) => StatusCode::BAD_REQUEST,
            Internal(_) | Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for CaptureError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            log::error!("{self}");
        }
        let body = ErrorBody {
            error: self.code().to_owned(),
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}

impl From<JsonRejection> for CaptureError {
    fn from(r: JsonRejection) -> Self {
        CaptureError::InvalidRequest(r.body_text())
    }
}

type ApiResult<T> = Result<Json<T>, CaptureError>;

/// Runs a store operation off the async executor; every write syncs a file.
async fn blocking<T, F>(store: Arc<Store>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Store) -> Result<T, CaptureError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| CaptureError::Internal(format!("request task failed: {e}")))?
        .map(Json)
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/config", get(config))
        .route("/charts/{file}", get(chart))
        .route("/sessions", post(open_session))
        .route("/sessions/{token}", get(session_status))
        .route("/sessions/{token}/clicks", post(clicks))
        .route("/sessions/{token}/answer", post(answer))
        .route("/sessions/{token}/sgl", post(sgl))
        .route("/sessions/{token}/finalize", post(finalize))
        .with_state(store)
}

async fn config(State(store): State<Arc<Store>>) -> Json<ClientConfig> {
    Json(ClientConfig::from_study(store.config()))
}

async fn chart(State(store): State<Arc<Store>>, Path(file): Path<String>) -> Result<Response, CaptureError> {
    let path = file
        .strip_suffix(".png")
        .and_then(|code| store.chart_path(code))
        .ok_or_else(|| CaptureError::ChartNotFound(file.clone()))?;
    let bytes = tokio::task::spawn_blocking(move || std::fs::read(path))
        .await
        .map_err(|e| CaptureError::Internal(format!("request task failed: {e}")))?
        .map_err(|e| {
            log::warn!("chart {file}: {e}");
            CaptureError::ChartNotFound(file)
        })?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

async fn open_session(
    State(store): State<Arc<Store>>,
    body: Result<Json<OpenRequest>, JsonRejection>,
) -> Result<Response, CaptureError> {
    let Json(req) = body?;
    let Json(status) = blocking(store, move |s| s.open_session(&req)).await?;
    let code = if status.resumed { StatusCode::OK } else { StatusCode::CREATED };
    Ok((code, Json(status)).into_response())
}

async fn session_status(
    State(store): State<Arc<Store>>,
    Path(token): Path<String>,
) -> ApiResult<crate::store::SessionStatus> {
    blocking(store, move |s| s.get_status(&token)).await
}

async fn clicks(
    State(store): State<Arc<Store>>,
    Path(token): Path<String>,
    body: Result<Json<Vec<ClickIn>>, JsonRejection>,
) -> ApiResult<crate::store::ClickAck> {
    let Json(batch) = body?;
    blocking(store, move |s| s.record_clicks(&token, &batch)).await
}

async fn answer(
    State(store): State<Arc<Store>>,
    Path(token): Path<String>,
    body: Result<Json<AnswerRequest>, JsonRejection>,
) -> ApiResult<crate::store::SessionStatus> {
    let Json(req) = body?;
    blocking(store, move |s| s.record_answer(&token, &req.item, req.choice)).await
}

async fn sgl(
    State(store): State<Arc<Store>>,
    Path(token): Path<String>,
    body: Result<Json<Vec<i64>>, JsonRejection>,
) -> ApiResult<crate::store::SessionStatus> {
    let Json(responses) = body?;
    blocking(store, move |s| s.record_sgl(&token, &responses)).await
}

async fn finalize(State(store): State<Arc<Store>>, Path(token): Path<String>) -> ApiResult<crate::store::SessionStatus> {
    blocking(store, move |s| s.finalize(&token)).await
}

/// Serves the capture API until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, store: Arc<Store>) -> std::io::Result<()> {
    log::info!("capture service listening on {}", listener.local_addr()?);
    axum::serve(listener, router(store)).await
}
