use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::json;
use spamlens_core::corpus::{Label, Review, Source};
use spamlens_core::models::ModelKind;
use spamlens_core::ExecMode;

use crate::analysis::{analyze_business, score_review, AnalysisError, BadgeThresholds, BusinessAnalysis, ReviewerStats, ScoreOutcome};
use crate::provider::{ProviderError, ReviewProvider};
use crate::registry::{Registry, RegistryError};

#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<Registry>,
    pub provider: Arc<dyn ReviewProvider>,
    pub badges: BadgeThresholds,
    pub mode: ExecMode,
}

impl AppState {
    pub fn new(registry: Arc<Registry>, provider: Arc<dyn ReviewProvider>, badges: BadgeThresholds) -> Self {
        AppState { registry, provider, badges, mode: ExecMode::default() }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/v1/models", get(models))
        .route("/api/v1/score", post(score))
        .route("/api/v1/business/analyze", post(analyze))
        .with_state(state)
}

/// JSON error body: `{"error": {"code": ..., "message": ...}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": {"code": self.code, "message": self.message}}))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::invalid(e.body_text())
    }
}

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::UnknownModel { .. } => ApiError::new(StatusCode::NOT_FOUND, "unknown_model", e.to_string()),
            RegistryError::Empty => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no_models", e.to_string()),
            RegistryError::Artifact(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
        }
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Invalid(m) => ApiError::invalid(m),
            AnalysisError::Model(m) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "model_error", m.to_string()),
        }
    }
}

impl From<ProviderError> for ApiError {
    fn from(e: ProviderError) -> Self {
        match e {
            ProviderError::NotFound { .. } => ApiError::new(StatusCode::NOT_FOUND, "business_not_found", e.to_string()),
            ProviderError::BadId { .. } => ApiError::invalid(e.to_string()),
            ProviderError::Upstream { .. } => ApiError::new(StatusCode::BAD_GATEWAY, "provider_error", e.to_string()),
        }
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn healthz(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({"status": "ok", "models": state.registry.snapshot().names().len()}))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub kind: Option<ModelKind>,
    pub default: bool,
    pub schema_id: String,
    pub trained_on: Option<String>,
    pub accuracy_report_ref: Option<String>,
}

async fn models(State(state): State<AppState>) -> Json<Vec<ModelInfo>> {
    let snap = state.registry.snapshot();
    let default = snap.default_name().map(str::to_owned);
    Json(
        snap.bundles()
            .map(|b| ModelInfo {
                name: b.meta.name.clone(),
                kind: b.meta.kind,
                default: default.as_deref() == Some(b.meta.name.as_str()),
                schema_id: b.pipeline.schema_id().to_owned(),
                trained_on: b.meta.trained_on.clone(),
                accuracy_report_ref: b.meta.accuracy_report_ref.clone(),
            })
            .collect(),
    )
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    pub text: String,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub reviewer: Option<ReviewerStats>,
}

async fn score(State(state): State<AppState>, body: Result<Json<ScoreRequest>, JsonRejection>) -> Result<Json<ScoreOutcome>, ApiError> {
    let Json(req) = body?;
    let bundle = state.registry.snapshot().get(req.model.as_deref())?;
    let out = blocking(move || Ok(score_review(&bundle, &req.text, req.reviewer.as_ref())?)).await?;
    Ok(Json(out))
}

/// A review supplied inline with an analysis request.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewInput {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub rating: Option<u8>,
    #[serde(default)]
    pub date: Option<NaiveDate>,
    #[serde(default)]
    pub reviewer_id: Option<String>,
}

impl ReviewInput {
    fn into_review(self) -> Result<Review, ApiError> {
        let r = Review {
            id: self.id,
            text: self.text,
            rating: self.rating,
            date: self.date,
            reviewer_id: self.reviewer_id,
            label: Label::Unknown,
            source: Source::Other,
        };
        r.validate().map_err(|e| ApiError::invalid(e.to_string()))?;
        Ok(r)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeRequest {
    pub business_id: String,
    #[serde(default)]
    pub model: Option<String>,
    /// When absent, reviews are fetched from the configured provider.
    #[serde(default)]
    pub reviews: Option<Vec<ReviewInput>>,
}

async fn analyze(
    State(state): State<AppState>,
    body: Result<Json<AnalyzeRequest>, JsonRejection>,
) -> Result<Json<BusinessAnalysis>, ApiError> {
    let Json(req) = body?;
    if req.business_id.trim().is_empty() {
        return Err(ApiError::invalid("business_id: must not be empty"));
    }
    let bundle = state.registry.snapshot().get(req.model.as_deref())?;
    let out = blocking(move || {
        let reviews = match req.reviews {
            Some(inline) => {
                let mut seen = std::collections::HashSet::new();
                let mut out = Vec::with_capacity(inline.len());
                for r in inline {
                    if !seen.insert(r.id.clone()) {
                        return Err(ApiError::invalid(format!("duplicate review id {:?}", r.id)));
                    }
                    out.push(r.into_review()?);
                }
                out
            }
            None => state.provider.reviews(&req.business_id)?,
        };
        Ok(analyze_business(&req.business_id, &reviews, &bundle, &state.badges, state.mode)?)
    })
    .await?;
    Ok(Json(out))
}
