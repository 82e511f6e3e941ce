//! JSON-over-HTTP routes. Errors are `{error_code, message}` bodies.

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use atlas_core::cartography::{CartographyError, Viewport};
use atlas_core::corpus::ProjectRecord;
use atlas_core::gateway::GatewayError;
use atlas_core::synthesis::{generate_idea, GeneratedIdea, Recipe, RecipeItem, SynthesisError};

use crate::explore::{
    full_viewport, map_payload, search, summarize_region, ExploreError, MapPayload, RegionSummary,
    SearchResult, TimeWindow, DEFAULT_K,
};
use crate::state::ServiceState;

pub type SharedState = Arc<ServiceState>;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_parameter", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(json!({ "error_code": self.code, "message": self.message }));
        (self.status, body).into_response()
    }
}

fn gateway_error(e: GatewayError) -> ApiError {
    match e {
        GatewayError::ProviderUnavailable(_) => {
            ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "provider_unavailable", e.to_string())
        }
        GatewayError::EmptyInput => ApiError::new(StatusCode::BAD_REQUEST, "empty_query", e.to_string()),
        other => ApiError::new(StatusCode::BAD_GATEWAY, "provider_error", other.to_string()),
    }
}

impl From<ExploreError> for ApiError {
    fn from(e: ExploreError) -> Self {
        match e {
            ExploreError::EmptyQuery => ApiError::new(StatusCode::BAD_REQUEST, "empty_query", e.to_string()),
            ExploreError::InvalidK | ExploreError::BadDate(_) => ApiError::bad_request(e.to_string()),
            ExploreError::InvalidWindow { .. } => {
                ApiError::new(StatusCode::BAD_REQUEST, "invalid_window", e.to_string())
            }
            ExploreError::EmptyRegion => ApiError::new(StatusCode::NOT_FOUND, "empty_region", e.to_string()),
            ExploreError::Gateway(g) => gateway_error(g),
            ExploreError::Transform(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "transform_failed", e.to_string())
            }
        }
    }
}

impl From<SynthesisError> for ApiError {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::RecipeSize(_) | SynthesisError::DuplicateItem { .. } | SynthesisError::UnknownAspect(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "invalid_recipe", e.to_string())
            }
            SynthesisError::UnknownProject(_) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_project", e.to_string())
            }
            SynthesisError::Gateway(g) => gateway_error(g),
            SynthesisError::MalformedReply => {
                ApiError::new(StatusCode::BAD_GATEWAY, "malformed_reply", e.to_string())
            }
            SynthesisError::Log(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "log_failed", e.to_string())
            }
        }
    }
}

fn query_error(e: QueryRejection) -> ApiError {
    ApiError::bad_request(e.body_text())
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    })?
}

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/map", get(map))
        .route("/api/project/{id}", get(project))
        .route("/api/search", get(search_handler))
        .route("/api/summary", get(summary))
        .route("/api/generate", post(generate))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .with_state(state)
}

async fn health(State(state): State<SharedState>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "corpus_size": state.corpus.len(),
        "artifact_version": state.artifact_version(),
        "label_style": state.label_style,
        "tier_thresholds": state.tiers,
    }))
}

/// Raw view parameters; everything optional, parsed by hand so errors use
/// the common error body.
#[derive(Debug, Default, Deserialize)]
pub struct ViewParams {
    x0: Option<f64>,
    y0: Option<f64>,
    x1: Option<f64>,
    y1: Option<f64>,
    zoom: Option<f64>,
    start: Option<String>,
    end: Option<String>,
}

impl ViewParams {
    fn viewport(&self, state: &ServiceState) -> Result<Viewport, ApiError> {
        let invalid = |e: CartographyError| ApiError::new(StatusCode::BAD_REQUEST, "invalid_viewport", e.to_string());
        let zoom = self.zoom.unwrap_or(1.0);
        let full = full_viewport(state, zoom).map_err(invalid)?;
        Viewport::new(
            self.x0.unwrap_or(full.x0),
            self.y0.unwrap_or(full.y0),
            self.x1.unwrap_or(full.x1),
            self.y1.unwrap_or(full.y1),
            zoom,
        )
        .map_err(invalid)
    }

    fn window(&self) -> Result<Option<TimeWindow>, ApiError> {
        Ok(TimeWindow::parse(self.start.as_deref(), self.end.as_deref())?)
    }
}

async fn map(
    State(state): State<SharedState>,
    params: Result<Query<ViewParams>, QueryRejection>,
) -> Result<Json<MapPayload>, ApiError> {
    let Query(params) = params.map_err(query_error)?;
    let viewport = params.viewport(&state)?;
    let window = params.window()?;
    Ok(Json(map_payload(&state, &viewport, window.as_ref())))
}

async fn project(
    State(state): State<SharedState>,
    Path(id): Path<String>,
) -> Result<Json<ProjectRecord>, ApiError> {
    state
        .corpus
        .project(&id)
        .map(|p| Json(ProjectRecord::from(p)))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_project", format!("unknown project {id}")))
}

#[derive(Debug, Deserialize)]
pub struct SearchParams {
    #[serde(default)]
    q: String,
    k: Option<usize>,
}

async fn search_handler(
    State(state): State<SharedState>,
    params: Result<Query<SearchParams>, QueryRejection>,
) -> Result<Json<SearchResult>, ApiError> {
    let Query(params) = params.map_err(query_error)?;
    let k = params.k.unwrap_or(DEFAULT_K);
    blocking(move || Ok(search(&state, &params.q, k)?)).await.map(Json)
}

async fn summary(
    State(state): State<SharedState>,
    params: Result<Query<ViewParams>, QueryRejection>,
) -> Result<Json<RegionSummary>, ApiError> {
    let Query(params) = params.map_err(query_error)?;
    let viewport = params.viewport(&state)?;
    let window = params.window()?;
    blocking(move || Ok(summarize_region(&state, &viewport, window.as_ref())?))
        .await
        .map(Json)
}

#[derive(Debug, Deserialize)]
pub struct GenerateBody {
    items: Vec<RecipeItem>,
}

#[derive(Debug, Serialize)]
pub struct GenerateResponse {
    title: String,
    description: String,
    prompt_used: String,
    created_at: chrono::DateTime<chrono::Utc>,
}

impl From<GeneratedIdea> for GenerateResponse {
    fn from(i: GeneratedIdea) -> Self {
        Self {
            title: i.title,
            description: i.description,
            prompt_used: i.prompt_used,
            created_at: i.created_at,
        }
    }
}

async fn generate(
    State(state): State<SharedState>,
    body: Result<Json<GenerateBody>, JsonRejection>,
) -> Result<Json<GenerateResponse>, ApiError> {
    let Json(body) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_recipe", e.body_text()))?;
    let recipe = Recipe::new(body.items)?;
    blocking(move || {
        let idea = generate_idea(&recipe, &state.corpus, &state.gateway)?;
        if let Some(log) = &state.idea_log {
            if let Err(e) = log.append(&idea) {
                tracing::error!("could not append to {}: {e}", log.path().display());
            }
        }
        Ok(idea)
    })
    .await
    .map(|i| Json(i.into()))
}
