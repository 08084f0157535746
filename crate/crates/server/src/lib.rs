//! HTTP front end over a loaded [`Store`].
//!
//! `GET /meta` describes the build, `GET /fetch` answers viewport queries,
//! and `/ui` optionally serves a static viewer bundle.

use axum::extract::{Query, Request, State};
use axum::http::{Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Serialize;
use serde_json::{json, Map, Value as JsonValue};
use ssv_core::data::Value;
use ssv_core::grammar::{ImportanceOrder, LayoutPlan};
use ssv_core::layout::Boundary;
use ssv_core::store::{StoreError, StoredCluster};
use ssv_core::{Store, Viewport};
use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("no build loaded")]
    NotLoaded,
    #[error("{0}")]
    BadRequest(String),
    #[error("unknown level {0}")]
    UnknownLevel(u32),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    fn status(&self) -> StatusCode {
        match self {
            ApiError::NotLoaded => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::UnknownLevel(_) => StatusCode::NOT_FOUND,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ApiError::NotLoaded => "NotLoaded",
            ApiError::BadRequest(_) => "BadRequest",
            ApiError::UnknownLevel(_) => "UnknownLevel",
            ApiError::Internal(_) => "Internal",
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownLevel(l) => ApiError::UnknownLevel(l),
            StoreError::InvalidViewport(m) => ApiError::BadRequest(m),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.code(), "message": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RankRow {
    pub id: u64,
    pub importance: f64,
    pub payload: Map<String, JsonValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AggGroup {
    /// Dimension name to value; empty without dimensions.
    pub key: Map<String, JsonValue>,
    /// Measure label such as `sum(z)` to value; `null` when undefined.
    pub values: Map<String, JsonValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ClusterOut {
    pub rep_id: u64,
    pub cx: f64,
    pub cy: f64,
    pub member_count: u64,
    pub bbox: [f64; 4],
    pub payload: Map<String, JsonValue>,
    pub aggregates: Vec<AggGroup>,
    pub ranklist: Vec<RankRow>,
    /// In level pixels.
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FetchResponse {
    pub level: u32,
    pub clusters: Vec<ClusterOut>,
    pub timing_ms: f64,
}

struct Loaded {
    store: Arc<Store>,
    meta: JsonValue,
    columns: Vec<String>,
}

#[derive(Clone)]
struct AppState(Option<Arc<Loaded>>);

impl AppState {
    fn loaded(&self) -> Result<&Arc<Loaded>, ApiError> {
        self.0.as_ref().ok_or(ApiError::NotLoaded)
    }
}

/// Plan summary returned by `/meta`. Constant for a build.
pub fn meta_json(store: &Store) -> JsonValue {
    let m = store.manifest();
    let p = &m.plan;
    let levels: Vec<[f64; 2]> = (1..=p.num_levels)
        .map(|l| {
            let (w, h) = p.level_canvas(l);
            [w, h]
        })
        .collect();
    json!({
        "numLevels": p.num_levels,
        "zoomFactor": p.zoom_factor,
        "canvas": { "width": p.canvas_width, "height": p.canvas_height },
        "levelCanvas": levels,
        "viewport": { "width": p.viewport_width, "height": p.viewport_height },
        "mark": { "width": p.mark_width, "height": p.mark_height },
        "theta": p.theta,
        "thetaDensity": p.theta_density,
        "densityBudget": p.density_budget,
        "budgetFeasible": p.budget_feasible,
        "markMode": p.mark_mode.as_str(),
        "customRenderer": p.custom_renderer,
        "order": p.order,
        "fields": { "x": p.x_field, "y": p.y_field, "z": p.z_field },
        "topk": p.topk,
        "boundary": p.boundary,
        "dimensions": p.dimensions.iter().map(|d| d.field.clone()).collect::<Vec<_>>(),
        "measures": p.measures.iter().map(|m| m.label()).collect::<Vec<_>>(),
        "objectCount": m.object_count,
        "columns": m.columns,
    })
}

fn value_json(v: &Value) -> JsonValue {
    match v {
        Value::Null => JsonValue::Null,
        Value::Num(x) => json!(x),
        Value::Str(s) => json!(s),
    }
}

fn payload_map(columns: &[String], values: &[Value]) -> Map<String, JsonValue> {
    columns.iter().cloned().zip(values.iter().map(value_json)).collect()
}

/// Stored ranking keys are negated for ascending order; report raw Z.
fn raw_importance(plan: &LayoutPlan, key: f64) -> f64 {
    match plan.order {
        ImportanceOrder::Descending => key,
        ImportanceOrder::Ascending => -key,
    }
}

pub fn cluster_out(plan: &LayoutPlan, columns: &[String], r: &StoredCluster) -> ClusterOut {
    let aggregates = r
        .agg
        .groups()
        .map(|(key, stats)| AggGroup {
            key: plan.dimensions.iter().map(|d| d.field.clone()).zip(key.iter().map(|k| json!(k))).collect(),
            values: plan
                .measures
                .iter()
                .zip(stats)
                .map(|(m, s)| (m.label(), s.value(m.function).map_or(JsonValue::Null, |v| json!(v))))
                .collect(),
        })
        .collect();
    ClusterOut {
        rep_id: r.rep_id,
        cx: r.cx,
        cy: r.cy,
        member_count: r.member_count,
        bbox: r.bbox,
        payload: payload_map(columns, &r.rep_payload),
        aggregates,
        ranklist: r
            .ranklist
            .iter()
            .map(|e| RankRow {
                id: e.id,
                importance: raw_importance(plan, e.importance),
                payload: payload_map(columns, &e.payload),
            })
            .collect(),
        boundary: r.boundary_px(plan),
    }
}

/// Parses `/fetch` parameters. Keys are case-insensitive.
pub fn parse_viewport(params: &HashMap<String, String>) -> Result<Viewport, ApiError> {
    let lower: HashMap<String, &str> = params.iter().map(|(k, v)| (k.to_ascii_lowercase(), v.as_str())).collect();
    let get = |k: &str| lower.get(k).copied().ok_or_else(|| ApiError::BadRequest(format!("missing parameter {k}")));
    let num = |k: &str| -> Result<f64, ApiError> {
        let s = get(k)?;
        match s.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(ApiError::BadRequest(format!("{k}={s:?} is not a finite number"))),
        }
    };
    let level = get("level")?;
    let level = level
        .trim()
        .parse::<u32>()
        .map_err(|_| ApiError::BadRequest(format!("level={level:?} is not a level number")))?;
    Ok(Viewport::new(level, num("xmin")?, num("ymin")?, num("xmax")?, num("ymax")?))
}

pub fn fetch(store: &Store, columns: &[String], v: &Viewport) -> Result<FetchResponse, ApiError> {
    let start = Instant::now();
    let rows = store.fetch_viewport(v)?;
    let plan = store.plan();
    let clusters = rows.iter().map(|r| cluster_out(plan, columns, r)).collect();
    Ok(FetchResponse { level: v.level, clusters, timing_ms: start.elapsed().as_secs_f64() * 1e3 })
}

async fn handle_meta(State(state): State<AppState>) -> Result<Json<JsonValue>, ApiError> {
    Ok(Json(state.loaded()?.meta.clone()))
}

async fn handle_fetch(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<FetchResponse>, ApiError> {
    let loaded = state.loaded()?.clone();
    let v = parse_viewport(&params)?;
    tokio::task::spawn_blocking(move || fetch(&loaded.store, &loaded.columns, &v))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map(Json)
}

async fn request_log(req: Request, next: Next) -> Response {
    let start = Instant::now();
    let method = req.method().to_string();
    let path = req.uri().path().to_string();
    let query = req.uri().query().unwrap_or("").to_string();
    let resp = next.run(req).await;
    let line = json!({
        "method": method,
        "path": path,
        "query": query,
        "status": resp.status().as_u16(),
        "ms": start.elapsed().as_secs_f64() * 1e3,
    });
    let _ = writeln!(std::io::stderr().lock(), "{line}");
    resp
}

/// Builds the application. Without a store, data endpoints answer 503.
pub fn router(store: Option<Arc<Store>>, ui_dir: Option<PathBuf>) -> Router {
    let loaded = store.map(|store| {
        let meta = meta_json(&store);
        let columns = store.manifest().columns.iter().map(|c| c.name.clone()).collect();
        Arc::new(Loaded { store, meta, columns })
    });
    let cors = CorsLayer::new().allow_methods([Method::GET]).allow_origin(Any);
    let mut app = Router::new()
        .route("/meta", get(handle_meta))
        .route("/fetch", get(handle_fetch))
        .with_state(AppState(loaded));
    if let Some(dir) = ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir).append_index_html_on_directories(true));
    }
    app.layer(cors).layer(middleware::from_fn(request_log))
}

/// Serves `app` until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
