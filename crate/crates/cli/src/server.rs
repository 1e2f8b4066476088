//! Triage HTTP API over precomputed detection artifacts.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use flowsentry::detector::{read_events_jsonl, EventRecord};
use flowsentry::eval::ContextBundle;
use flowsentry::pipeline::{bundle_id, events_file, Method, ReviewSample, ANNOTATIONS};
use flowsentry::triage::{Annotation, AnnotationLog, Tier, TierSummary, TIERS};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;
use tower_http::services::{ServeDir, ServeFile};

pub const DEFAULT_PORT: u16 = 8080;
const DEFAULT_PAGE_SIZE: usize = 50;
const MAX_PAGE_SIZE: usize = 1000;

/// Read-only detection artifacts plus the annotation log writer.
pub struct AppState {
    events: Vec<EventRecord>,
    /// Review order: the seeded sample if one exists, else every event.
    queue: Vec<String>,
    bundles: PathBuf,
    log: Mutex<AnnotationLog>,
}

impl AppState {
    /// Loads the GNN events and review sample found under `out`.
    pub fn load(out: &Path, annotations: Option<&Path>) -> flowsentry::Result<Self> {
        let events = read_events_jsonl(&out.join(events_file(Method::Gnn))).map_err(|e| match e {
            flowsentry::Error::Io(_) => flowsentry::Error::MissingArtifact { path: out.join(events_file(Method::Gnn)), prerequisite: "detect" },
            other => other,
        })?;
        let sample_path = out.join("review/sample.json");
        let queue = if sample_path.exists() {
            serde_json::from_slice::<ReviewSample>(&std::fs::read(&sample_path)?)?.ids
        } else {
            (0..events.len()).map(bundle_id).collect()
        };
        let log_path = annotations.map_or_else(|| out.join(ANNOTATIONS), Path::to_path_buf);
        if let Some(parent) = log_path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        Ok(Self { events, queue, bundles: out.join("bundles"), log: Mutex::new(AnnotationLog::open(&log_path)?) })
    }

    fn event(&self, id: &str) -> Option<&EventRecord> {
        let idx: usize = id.strip_prefix("gnn-")?.parse().ok()?;
        (bundle_id(idx) == id).then(|| self.events.get(idx)).flatten()
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    InvalidTier(String),
    BadRequest(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotFound(id) => (StatusCode::NOT_FOUND, json!({ "error": format!("unknown anomaly id {id:?}") })),
            ApiError::InvalidTier(t) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": format!("invalid tier {t:?}"), "allowed": TIERS }),
            ),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({ "error": m })),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": m })),
        };
        (status, Json(body)).into_response()
    }
}

impl From<flowsentry::Error> for ApiError {
    fn from(e: flowsentry::Error) -> Self {
        ApiError::Internal(e.to_string())
    }
}

type Shared = Arc<AppState>;

#[derive(Debug, Deserialize)]
pub struct PageQuery {
    page: Option<usize>,
    per_page: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ListItem {
    pub id: String,
    pub flow: String,
    pub method: String,
    pub start_ts: i64,
    pub end_ts: i64,
    pub peak_score: f64,
    pub annotated: bool,
    pub tier: Option<Tier>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnomalyPage {
    pub items: Vec<ListItem>,
    pub page: usize,
    pub per_page: usize,
    pub total: usize,
    pub pending: usize,
}

async fn list(State(st): State<Shared>, Query(q): Query<PageQuery>) -> Result<Json<AnomalyPage>, ApiError> {
    let per_page = q.per_page.unwrap_or(DEFAULT_PAGE_SIZE);
    if per_page == 0 || per_page > MAX_PAGE_SIZE {
        return Err(ApiError::BadRequest(format!("per_page must be in 1..={MAX_PAGE_SIZE}")));
    }
    let page = q.page.unwrap_or(0);
    let log = st.log.lock().await;
    let index = log.index();
    let annotated: BTreeSet<&str> = st.queue.iter().map(String::as_str).filter(|id| !index.for_anomaly(id).is_empty()).collect();
    let items = st
        .queue
        .iter()
        .skip(page * per_page)
        .take(per_page)
        .filter_map(|id| {
            let e = st.event(id)?;
            let tier = index.for_anomaly(id).iter().max_by_key(|a| a.timestamp).map(|a| a.tier);
            Some(ListItem {
                id: id.clone(),
                flow: e.flow.clone(),
                method: e.method.clone(),
                start_ts: e.start_ts,
                end_ts: e.end_ts,
                peak_score: e.peak_score,
                annotated: tier.is_some(),
                tier,
            })
        })
        .collect();
    Ok(Json(AnomalyPage { items, page, per_page, total: st.queue.len(), pending: st.queue.len() - annotated.len() }))
}

type Pairs = Vec<(i64, f64)>;

fn pairs(ts: &[i64], values: impl IntoIterator<Item = Option<f64>>) -> Pairs {
    ts.iter().zip(values).filter_map(|(t, v)| v.map(|v| (*t, v))).collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ContextView {
    pub flow: String,
    pub weight: f64,
    pub series: Pairs,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnomalyDetail {
    pub id: String,
    pub event: EventRecord,
    pub target: Pairs,
    pub prediction: Pairs,
    pub band_lower: Pairs,
    pub band_upper: Pairs,
    pub score: Pairs,
    pub context: Vec<ContextView>,
    pub baseline_scores: std::collections::BTreeMap<String, Pairs>,
    pub annotations: Vec<Annotation>,
}

async fn detail(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<AnomalyDetail>, ApiError> {
    if st.event(&id).is_none() {
        return Err(ApiError::NotFound(id));
    }
    let b = ContextBundle::load(&st.bundles, &id)?;
    let ts = &b.timestamps;
    let annotations = st.log.lock().await.index().for_anomaly(&id).into_iter().cloned().collect();
    Ok(Json(AnomalyDetail {
        id,
        target: pairs(ts, b.target.iter().copied().map(Some)),
        prediction: pairs(ts, b.prediction.iter().copied()),
        band_lower: pairs(ts, b.band_lower.iter().copied()),
        band_upper: pairs(ts, b.band_upper.iter().copied()),
        score: pairs(ts, b.score.iter().copied()),
        context: b
            .context
            .iter()
            .map(|c| ContextView { flow: c.flow.clone(), weight: c.weight, series: pairs(ts, c.values.iter().copied().map(Some)) })
            .collect(),
        baseline_scores: b.baseline_scores.iter().map(|(m, v)| (m.clone(), pairs(ts, v.iter().copied()))).collect(),
        event: b.event,
        annotations,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnnotationBody {
    pub tier: String,
    #[serde(default)]
    pub note: String,
    #[serde(default = "default_annotator")]
    pub annotator: String,
}

fn default_annotator() -> String {
    "expert".into()
}

async fn annotate(
    State(st): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<AnnotationBody>,
) -> Result<Json<Annotation>, ApiError> {
    if st.event(&id).is_none() {
        return Err(ApiError::NotFound(id));
    }
    let tier = Tier::parse(&body.tier).map_err(|_| ApiError::InvalidTier(body.tier.clone()))?;
    if body.annotator.trim().is_empty() {
        return Err(ApiError::BadRequest("annotator must not be empty".into()));
    }
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs() as i64);
    let record = Annotation { anomaly_id: id, tier, annotator: body.annotator, timestamp, note: body.note };
    let stored = st.log.lock().await.append(record)?;
    Ok(Json(stored))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SummaryView {
    #[serde(flatten)]
    pub counts: TierSummary,
    pub queue: usize,
    pub pending: usize,
    pub tiers: Vec<String>,
}

async fn summary(State(st): State<Shared>) -> Json<SummaryView> {
    let log = st.log.lock().await;
    let index = log.index();
    let pending = st.queue.iter().filter(|id| index.for_anomaly(id).is_empty()).count();
    Json(SummaryView { counts: index.summary(), queue: st.queue.len(), pending, tiers: TIERS.iter().map(|t| t.to_string()).collect() })
}

async fn tiers() -> Json<[&'static str; 3]> {
    Json(TIERS)
}

/// API routes, plus the UI's static files when `ui` is a directory.
pub fn router(state: AppState, ui: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/anomalies", get(list))
        .route("/api/anomalies/{id}", get(detail))
        .route("/api/anomalies/{id}/annotation", post(annotate))
        .route("/api/summary", get(summary))
        .route("/api/tiers", get(tiers))
        .with_state(Arc::new(state));
    match ui.filter(|d| d.is_dir()) {
        Some(dir) => api.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(dir.join("index.html")))),
        None => api,
    }
}

pub async fn serve(state: AppState, ui: Option<&Path>, host: &str, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    log::info!("triage server listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, ui)).await
}
