//! JSON-over-HTTP access to a report store for the review queue.
//!
//! All clinical numbers (categories, precision, sensitivity, hours) are
//! computed here with the core library; clients only display them.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use echotriage_core::pipeline::{PipelineError, ReviewerOverride, Store};
use echotriage_core::triage::{
    calibrate_cutoff, cohort_pairs, evaluate_cutoff, read_cohort_csv, workload_savings, Category, ThresholdConfig,
    TriageError, WorkloadParams,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match &e {
            PipelineError::UnknownStudy(_) => StatusCode::NOT_FOUND,
            PipelineError::InvalidOverride(_) | PipelineError::InvalidConfig(_) | PipelineError::Triage(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl From<TriageError> for ApiError {
    fn from(e: TriageError) -> Self {
        Self::unprocessable(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Clone)]
struct AppState {
    store: Arc<Store>,
}

/// Runs store access on the blocking pool.
async fn with_store<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Store) -> ApiResult<T> + Send + 'static,
{
    let store = state.store.clone();
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

pub fn router(store: Store) -> Router {
    let state = AppState { store: Arc::new(store) };
    Router::new()
        .route("/api/studies", get(list_studies))
        .route("/api/studies/{id}", get(get_report))
        .route("/api/studies/{id}/versions", get(get_versions))
        .route("/api/studies/{id}/masks", get(get_masks))
        .route("/api/studies/{id}/override", post(post_override))
        .route("/api/thresholds", get(get_thresholds).put(put_thresholds))
        .route("/api/cohorts", get(list_cohorts))
        .route("/api/cohorts/{name}", put(put_cohort))
        .route("/api/whatif", post(what_if))
        .route("/api/calibrate", post(calibrate))
        .with_state(state)
}

async fn list_studies(State(s): State<AppState>) -> ApiResult<Response> {
    let list = with_store(&s, |st| Ok(st.list_studies()?)).await?;
    Ok(Json(list).into_response())
}

async fn get_report(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let report = with_store(&s, move |st| {
        st.reviewed_report(&id)?
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown study {id:?}")))
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], report.to_canonical_json()).into_response())
}

async fn get_versions(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let versions = with_store(&s, move |st| {
        let v = st.report_versions(&id)?;
        if v.is_empty() {
            return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown study {id:?}")));
        }
        Ok(v)
    })
    .await?;
    Ok(Json(versions).into_response())
}

async fn get_masks(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let masks = with_store(&s, move |st| Ok(st.masks(&id)?)).await?;
    Ok(Json(masks).into_response())
}

#[derive(Deserialize)]
struct OverrideRequest {
    category: String,
    reviewer_id: String,
    #[serde(default)]
    note: Option<String>,
}

async fn post_override(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<OverrideRequest>,
) -> ApiResult<Response> {
    let category: Category = req.category.parse()?;
    let ov = ReviewerOverride {
        category,
        reviewer_id: req.reviewer_id,
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        note: req.note,
    };
    let report = with_store(&s, move |st| Ok(st.add_override(&id, ov)?)).await?;
    Ok((
        StatusCode::CREATED,
        [(header::CONTENT_TYPE, "application/json")],
        report.to_canonical_json(),
    )
        .into_response())
}

async fn get_thresholds(State(s): State<AppState>) -> ApiResult<Json<ThresholdConfig>> {
    let t = with_store(&s, |st| Ok(st.thresholds()?.unwrap_or_default())).await?;
    Ok(Json(t))
}

async fn put_thresholds(State(s): State<AppState>, Json(t): Json<ThresholdConfig>) -> ApiResult<Json<ThresholdConfig>> {
    t.validate()?;
    with_store(&s, move |st| Ok(st.set_thresholds(&t)?)).await?;
    Ok(Json(t))
}

async fn list_cohorts(State(s): State<AppState>) -> ApiResult<Json<Vec<String>>> {
    Ok(Json(with_store(&s, |st| Ok(st.cohort_names()?)).await?))
}

async fn put_cohort(State(s): State<AppState>, Path(name): Path<String>, body: Bytes) -> ApiResult<Response> {
    let entries = read_cohort_csv(body.as_ref())?;
    if entries.is_empty() {
        return Err(ApiError::unprocessable("cohort is empty"));
    }
    let size = entries.len();
    let stored = name.clone();
    with_store(&s, move |st| Ok(st.put_cohort(&stored, &entries)?)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "name": name, "size": size }))).into_response())
}

async fn load_cohort(s: &AppState, name: String) -> ApiResult<Vec<(f64, bool)>> {
    let entries = with_store(s, move |st| {
        st.cohort(&name)?
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown cohort {name:?}")))
    })
    .await?;
    Ok(cohort_pairs(&entries))
}

#[derive(Deserialize)]
struct WhatIfRequest {
    cohort: String,
    cutoff: f64,
    /// Workload parameters; `sensitivity` is replaced by the what-if value.
    #[serde(default)]
    workload: Option<WorkloadParams>,
}

#[derive(Serialize)]
struct WhatIfResponse {
    cohort: String,
    cutoff: f64,
    precision: Option<f64>,
    sensitivity: f64,
    hours_per_year: f64,
    confusion: echotriage_core::triage::Confusion,
}

async fn what_if(State(s): State<AppState>, Json(req): Json<WhatIfRequest>) -> ApiResult<Json<WhatIfResponse>> {
    if !(0.0..=100.0).contains(&req.cutoff) {
        return Err(ApiError::unprocessable(format!(
            "cutoff {} is outside [0, 100]",
            req.cutoff
        )));
    }
    let cohort = load_cohort(&s, req.cohort.clone()).await?;
    let point = evaluate_cutoff(&cohort, req.cutoff)?;
    let params = WorkloadParams {
        sensitivity: point.sensitivity,
        ..req.workload.unwrap_or_default()
    };
    Ok(Json(WhatIfResponse {
        cohort: req.cohort,
        cutoff: req.cutoff,
        precision: point.precision,
        sensitivity: point.sensitivity,
        hours_per_year: workload_savings(&params)?,
        confusion: point.confusion,
    }))
}

#[derive(Deserialize)]
struct CalibrateRequest {
    cohort: String,
    precision_floor: f64,
}

async fn calibrate(State(s): State<AppState>, Json(req): Json<CalibrateRequest>) -> ApiResult<Response> {
    let cohort = load_cohort(&s, req.cohort).await?;
    let result = calibrate_cutoff(&cohort, req.precision_floor)?;
    Ok(Json(result).into_response())
}

/// Serves `store_path` on `addr` until the process is stopped.
pub async fn serve(store_path: PathBuf, addr: SocketAddr) -> std::io::Result<()> {
    let store = Store::open_existing(&store_path)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, store = %store_path.display(), "serving");
    axum::serve(listener, router(store)).await
}
