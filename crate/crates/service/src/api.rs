//! HTTP/JSON routes.
//!
//! | method and path | body | response |
//! |---|---|---|
//! | `POST /sessions` | optional `{"seed": u64}` | `201 {schema_version, session_id, seed, total_trials}` |
//! | `GET /sessions/{id}/trial` | | [`TrialPayload`] |
//! | `POST /sessions/{id}/response` | [`Submission`] | [`AckPayload`] |
//! | `GET /export` | | CSV, see [`bteach_core::study::export`] |
//! | `GET /export.json` | | the same rows as JSON |
//! | `GET /assets/{bundle}/{file}` | | bundle PNG |
//!
//! Errors are `{schema_version, error: {kind, message}}` with status 400
//! (malformed body), 404 (unknown session or asset), 409 (out of order),
//! 422 (invalid answer) or 500.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use bteach_core::dataset::{ExplanationBundle, BUNDLE_IMAGE_FILES};
use bteach_core::study::session::{AiJudgement, Feedback, TOTAL_TRIALS};
use bteach_core::study::{export_sessions, Block, NextTrial, Phase, SessionError, SessionStore, Submission, TrialView};
use bteach_core::{Category, Label};

use crate::materials::StudyMaterials;

pub const API_SCHEMA_VERSION: u32 = 1;

pub struct AppState {
    pub store: SessionStore,
    pub materials: StudyMaterials,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    pub schema_version: u32,
    pub session_id: String,
    pub seed: u64,
    pub total_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetPayload {
    pub id: String,
    pub image_url: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub saliency_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamplePayload {
    pub role: Category,
    pub id: String,
    pub ground_truth: Label,
    pub ai_label: Label,
    pub ai_prob: f64,
    pub image_url: String,
    pub saliency_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPayload {
    pub schema_version: u32,
    pub done: bool,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub trial: Option<TrialBody>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialBody {
    pub trial_index: usize,
    pub total_trials: usize,
    pub block: Block,
    pub block_trial_index: usize,
    pub phase: Phase,
    pub target: TargetPayload,
    /// TP, TN, FP, FN; empty when the phase or block shows no examples.
    pub examples: Vec<ExamplePayload>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ai_judgement: Option<AiJudgement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reminder_diagnosis: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AckPayload {
    pub schema_version: u32,
    pub trial_index: usize,
    pub phase: Phase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feedback: Option<Feedback>,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub schema_version: u32,
    pub error: ErrorBody,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, kind) = match &e {
            SessionError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            SessionError::OutOfOrder { .. } => (StatusCode::CONFLICT, "out_of_order"),
            SessionError::Validation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            SessionError::Plan(_) | SessionError::Storage(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, kind, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorPayload {
            schema_version: API_SCHEMA_VERSION,
            error: ErrorBody {
                kind: self.kind.to_string(),
                message: self.message,
            },
        };
        (self.status, Json(body)).into_response()
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/trial", get(next_trial))
        .route("/sessions/{id}/response", post(record_response))
        .route("/export", get(export_csv))
        .route("/export.json", get(export_json))
        .route("/assets/{bundle}/{file}", get(asset))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        let status = if e.is_data() {
            StatusCode::UNPROCESSABLE_ENTITY
        } else {
            StatusCode::BAD_REQUEST
        };
        ApiError::new(status, "bad_request", e.to_string())
    })
}

async fn create_session(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSessionRequest = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSessionRequest { seed: None }
    } else {
        parse_json(&body)?
    };
    let (session_id, seed) = blocking(move || state.store.create(req.seed)).await??;
    let body = CreateSessionResponse {
        schema_version: API_SCHEMA_VERSION,
        session_id,
        seed,
        total_trials: TOTAL_TRIALS,
    };
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

fn asset_url(bundle: &str, file: &str) -> String {
    format!("/assets/{bundle}/{file}")
}

fn trial_body(view: TrialView, bundles: &HashMap<String, ExplanationBundle>) -> Result<TrialBody, ApiError> {
    let bundle = bundles.get(&view.bundle).ok_or_else(|| {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", format!("bundle {} not loaded", view.bundle))
    })?;
    let name = view.bundle.as_str();
    let examples = if view.show_examples {
        bundle
            .examples
            .iter()
            .map(|e| ExamplePayload {
                role: e.role,
                id: e.image.id.clone(),
                ground_truth: e.image.ground_truth,
                ai_label: e.image.model_label,
                ai_prob: e.image.model_prob,
                image_url: asset_url(name, &e.image.image),
                saliency_url: asset_url(name, &e.image.saliency),
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(TrialBody {
        trial_index: view.trial_index,
        total_trials: view.total_trials,
        block: view.block,
        block_trial_index: view.block_trial_index,
        phase: view.phase,
        target: TargetPayload {
            id: view.target.id,
            image_url: asset_url(name, &bundle.target.image),
            saliency_url: view
                .target
                .show_saliency
                .then(|| asset_url(name, &bundle.target.saliency)),
        },
        examples,
        ai_judgement: view.ai_judgement,
        reminder_diagnosis: view.reminder_diagnosis,
    })
}

async fn next_trial(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<TrialPayload>, ApiError> {
    let st = state.clone();
    let next = blocking(move || st.store.next_trial(&id)).await??;
    let payload = match next {
        NextTrial::Done => TrialPayload {
            schema_version: API_SCHEMA_VERSION,
            done: true,
            trial: None,
        },
        NextTrial::Trial(view) => TrialPayload {
            schema_version: API_SCHEMA_VERSION,
            done: false,
            trial: Some(trial_body(view, &state.materials.bundles)?),
        },
    };
    Ok(Json(payload))
}

async fn record_response(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<AckPayload>, ApiError> {
    let sub: Submission = parse_json(&body)?;
    let ack = blocking(move || state.store.record_response(&id, &sub)).await??;
    Ok(Json(AckPayload {
        schema_version: API_SCHEMA_VERSION,
        trial_index: ack.trial_index,
        phase: ack.phase,
        feedback: ack.feedback,
        done: ack.done,
    }))
}

async fn export(state: Shared) -> Result<bteach_core::study::Export, ApiError> {
    Ok(blocking(move || state.store.with_snapshot(export_sessions)).await??)
}

async fn export_csv(State(state): State<Shared>) -> Result<Response, ApiError> {
    let csv = export(state).await?.to_csv();
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

async fn export_json(State(state): State<Shared>) -> Result<Response, ApiError> {
    let json = export(state).await?.to_json();
    Ok(([(header::CONTENT_TYPE, "application/json")], json).into_response())
}

async fn asset(State(state): State<Shared>, Path((bundle, file)): Path<(String, String)>) -> Result<Response, ApiError> {
    // Only the fixed PNG names of known bundles are served; bundle.json
    // carries the target's ground truth and stays private.
    if !state.materials.bundles.contains_key(&bundle) || !BUNDLE_IMAGE_FILES.contains(&file.as_str()) {
        return Err(ApiError::not_found(format!("no asset {bundle}/{file}")));
    }
    let path = state.materials.bundles_dir.join(&bundle).join(&file);
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|_| ApiError::not_found(format!("no asset {bundle}/{file}")))?;
    Ok((
        [(header::CONTENT_TYPE, "image/png"), (header::CACHE_CONTROL, "no-cache")],
        bytes,
    )
        .into_response())
}
