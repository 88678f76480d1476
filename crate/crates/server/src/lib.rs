//! HTTP API behind the seed studio.
//!
//! Sessions live in memory only; restarting the server drops them. Every
//! route answers JSON except the image routes, which return PGM (`P5`) or
//! PPM (`P6`) bytes. Errors are `{"error": ..., "field": ...}` where `field`
//! names the offending request field when there is one.

mod overlay;
mod rle;

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{Mutex, RwLock};
use uuid::Uuid;

use seedgrow_core::io::{encode_mask_pgm, encode_pgm};
use seedgrow_core::{
    compute_gradient, CriterionConfig, Engine, Error, GradientField, GrowReport, LabelMap,
    Neighborhood, RegionSummary, ScalarGrid, SeedSet, Site,
};

pub use overlay::{render_overlay, PALETTE};
pub use rle::{rle_decode, rle_encode};

struct Run {
    seeds: SeedSet,
    criterion: Option<CriterionConfig>,
    labels: LabelMap,
    report: GrowReport,
}

struct Session {
    grid: ScalarGrid,
    gradient: Option<Arc<GradientField>>,
    history: Vec<Run>,
}

impl Session {
    fn gradient(&mut self) -> Arc<GradientField> {
        self.gradient
            .get_or_insert_with(|| Arc::new(compute_gradient(&self.grid)))
            .clone()
    }
}

type SessionMap = RwLock<HashMap<Uuid, Arc<Mutex<Session>>>>;

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<SessionMap>,
}

pub fn app() -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info).delete(delete_session))
        .route("/sessions/{id}/runs", post(run_grow))
        .route("/sessions/{id}/history", get(history))
        .route("/sessions/{id}/gradient", get(gradient_preview))
        .route("/sessions/{id}/runs/{run}/overlay", get(overlay))
        .route("/sessions/{id}/runs/{run}/mask", get(mask))
        .with_state(AppState::default())
}

/// Serve until the process is stopped.
pub async fn serve(addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app()).await
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            field: None,
        }
    }

    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            message: message.into(),
            field: Some(field.into()),
        }
    }

    fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, what)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({ "error": self.message, "field": self.field })),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn image(content_type: &'static str, bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, content_type)], bytes).into_response()
}

async fn session(state: &AppState, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
    let uuid =
        Uuid::parse_str(id).map_err(|_| ApiError::not_found(format!("no session `{id}`")))?;
    state
        .sessions
        .read()
        .await
        .get(&uuid)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("no session `{id}`")))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SessionInfo {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub depth: usize,
    pub min: f64,
    pub max: f64,
    pub runs: usize,
}

fn info(id: Uuid, s: &Session) -> SessionInfo {
    let dims = s.grid.dims();
    let (min, max) = s.grid.min_max();
    SessionInfo {
        id: id.to_string(),
        width: dims.width(),
        height: dims.height(),
        depth: dims.depth(),
        min,
        max,
        runs: s.history.len(),
    }
}

async fn create_session(
    State(state): State<AppState>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<SessionInfo>)> {
    let grid =
        seedgrow_core::io::decode_pgm(&body).map_err(|e| ApiError::field("body", e.to_string()))?;
    let id = Uuid::new_v4();
    let session = Session {
        grid,
        gradient: None,
        history: Vec::new(),
    };
    let body = info(id, &session);
    state
        .sessions
        .write()
        .await
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)))
}

async fn session_info(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionInfo>> {
    let s = session(&state, &id).await?;
    let s = s.lock().await;
    Ok(Json(info(Uuid::parse_str(&id).expect("checked"), &s)))
}

async fn delete_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<StatusCode> {
    session(&state, &id).await?;
    state
        .sessions
        .write()
        .await
        .remove(&Uuid::parse_str(&id).expect("checked"));
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedPoint {
    pub x: i64,
    pub y: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowRequest {
    pub seeds: Vec<SeedPoint>,
    pub engine: String,
    /// Required for the stack engine, rejected for the classic one.
    #[serde(default)]
    pub criterion: Option<String>,
    /// Defaults to n4 for stack and n8 for classic.
    #[serde(default)]
    pub neighborhood: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowResponse {
    pub run_id: usize,
    pub width: usize,
    pub height: usize,
    /// `[label, count]` pairs over the labels in x-fastest order.
    pub mask: Vec<(u32, u64)>,
    pub report: GrowReport,
    pub region_stats: Vec<RegionSummary>,
}

struct ValidRequest {
    seeds: SeedSet,
    engine: Engine,
    criterion: Option<CriterionConfig>,
    neighborhood: Neighborhood,
}

fn validate(req: &GrowRequest, grid: &ScalarGrid) -> ApiResult<ValidRequest> {
    let dims = grid.dims();
    let engine: Engine = req
        .engine
        .parse()
        .map_err(|e: Error| ApiError::field("engine", e.to_string()))?;
    if req.seeds.is_empty() {
        return Err(ApiError::field("seeds", "at least one seed is required"));
    }
    let mut sites = Vec::with_capacity(req.seeds.len());
    for (i, p) in req.seeds.iter().enumerate() {
        let ok = |v: i64, extent: usize| v >= 0 && (v as u64) < extent as u64;
        if !ok(p.x, dims.width()) || !ok(p.y, dims.height()) {
            return Err(ApiError::field(
                format!("seeds[{i}]"),
                format!("seed ({}, {}) lies outside the {dims} image", p.x, p.y),
            ));
        }
        sites.push(Site::xy(p.x as usize, p.y as usize));
    }
    let seeds = SeedSet::new(sites).map_err(|e| ApiError::field("seeds", e.to_string()))?;
    let criterion = match (engine, &req.criterion) {
        (Engine::Stack, None) => {
            return Err(ApiError::field(
                "criterion",
                "the stack engine needs a criterion",
            ))
        }
        (Engine::Classic, Some(_)) => {
            return Err(ApiError::field(
                "criterion",
                "the classic engine takes no criterion",
            ))
        }
        (_, Some(text)) => Some(
            text.parse::<CriterionConfig>()
                .map_err(|e| ApiError::field("criterion", e.to_string()))?,
        ),
        (_, None) => None,
    };
    let neighborhood = match &req.neighborhood {
        None if engine == Engine::Classic => Neighborhood::classic_default(dims),
        None => Neighborhood::stack_default(dims),
        Some(text) => {
            let nb: Neighborhood = text
                .parse()
                .map_err(|e: Error| ApiError::field("neighborhood", e.to_string()))?;
            nb.check(dims)
                .map_err(|e| ApiError::field("neighborhood", e.to_string()))?;
            nb
        }
    };
    Ok(ValidRequest {
        seeds,
        engine,
        criterion,
        neighborhood,
    })
}

async fn run_grow(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<GrowResponse>> {
    let s = session(&state, &id).await?;
    let req: GrowRequest = serde_json::from_slice(&body).map_err(|e| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("invalid request body: {e}"),
        )
    })?;

    // Holding the session lock for the whole run keeps history ordered;
    // the work itself runs off the async threads so other sessions proceed.
    let mut guard = s.lock_owned().await;
    let response = tokio::task::spawn_blocking(move || -> ApiResult<GrowResponse> {
        let v = validate(&req, &guard.grid)?;
        let grad = v
            .criterion
            .as_ref()
            .filter(|c| c.uses_gradient())
            .map(|_| guard.gradient());
        let (labels, report) = seedgrow_core::grow(
            &guard.grid,
            grad.as_deref(),
            &v.seeds,
            v.engine,
            v.neighborhood,
            v.criterion.as_ref(),
        )
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
        let dims = guard.grid.dims();
        let response = GrowResponse {
            run_id: guard.history.len(),
            width: dims.width(),
            height: dims.height(),
            mask: rle_encode(labels.labels()),
            report: report.clone(),
            region_stats: labels.summaries(),
        };
        guard.history.push(Run {
            seeds: v.seeds,
            criterion: v.criterion,
            labels,
            report,
        });
        Ok(response)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(response))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub run_id: usize,
    pub engine: Engine,
    pub neighborhood: Neighborhood,
    pub criterion: Option<CriterionConfig>,
    pub seeds: SeedSet,
    pub sites_examined: u64,
    pub sites_accepted: u64,
    pub region_stats: Vec<RegionSummary>,
}

async fn history(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<HistoryEntry>>> {
    let s = session(&state, &id).await?;
    let s = s.lock().await;
    Ok(Json(
        s.history
            .iter()
            .enumerate()
            .map(|(i, r)| HistoryEntry {
                run_id: i,
                engine: r.report.engine,
                neighborhood: r.report.neighborhood,
                criterion: r.criterion.clone(),
                seeds: r.seeds.clone(),
                sites_examined: r.report.sites_examined,
                sites_accepted: r.report.sites_accepted,
                region_stats: r.labels.summaries(),
            })
            .collect(),
    ))
}

async fn gradient_preview(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let s = session(&state, &id).await?;
    let mut s = s.lock().await;
    let preview = s.gradient().normalized(255);
    let bytes = encode_pgm(&preview)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(image("image/x-portable-graymap", bytes))
}

async fn with_run<T>(
    state: &AppState,
    id: &str,
    run: usize,
    f: impl FnOnce(&Session, &Run) -> T,
) -> ApiResult<T> {
    let s = session(state, id).await?;
    let s = s.lock().await;
    let r = s
        .history
        .get(run)
        .ok_or_else(|| ApiError::not_found(format!("no run {run} in session `{id}`")))?;
    Ok(f(&s, r))
}

async fn overlay(
    State(state): State<AppState>,
    Path((id, run)): Path<(String, usize)>,
) -> ApiResult<Response> {
    let bytes = with_run(&state, &id, run, |s, r| render_overlay(&s.grid, &r.labels)).await?;
    Ok(image("image/x-portable-pixmap", bytes))
}

/// The mask exactly as `seedgrow grow` writes it.
async fn mask(
    State(state): State<AppState>,
    Path((id, run)): Path<(String, usize)>,
) -> ApiResult<Response> {
    let bytes = with_run(&state, &id, run, |_, r| encode_mask_pgm(&r.labels)).await?;
    let bytes =
        bytes.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(image("image/x-portable-graymap", bytes))
}
