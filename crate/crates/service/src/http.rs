//! HTTP API over one loaded checkpoint, index and corpus.
//!
//! Endpoints: `GET /health`, `GET /requirements`, `POST /match`,
//! `POST /annotations`, `GET /annotations/export`. Match responses depend
//! only on the request and the loaded state.

use std::sync::{Arc, Mutex};

use auditmatch::corpus::{annotations_tsv, load_corpus_dir, Corpus};
use auditmatch::encoder::Checkpoint;
use auditmatch::matcher::{load_index, top_k, EmbeddingIndex, ItemKind};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use crate::config::ServiceConfig;
use crate::error::{ServiceError, ServiceResult};
use crate::store::{AnnotationEvent, AnnotationStore};
use crate::wire::{AnnotateResponse, ErrorBody, MatchRequest, MatchResponse, RequirementView, Score, WireHit};

/// A checkpoint with an index it built.
#[derive(Debug)]
pub struct Engine {
    pub checkpoint: Checkpoint,
    pub index: EmbeddingIndex,
}

impl Engine {
    pub fn new(checkpoint: Checkpoint, index: EmbeddingIndex) -> ServiceResult<Self> {
        if index.fingerprint() != checkpoint.fingerprint() {
            return Err(ServiceError::Config(format!(
                "index was built by checkpoint {}, not the configured {}",
                index.fingerprint(),
                checkpoint.fingerprint()
            )));
        }
        Ok(Engine { checkpoint, index })
    }
}

#[derive(Debug)]
pub struct AppState {
    pub corpus: Corpus,
    pub engine: Option<Engine>,
    pub default_k: usize,
    store: Mutex<AnnotationStore>,
}

impl AppState {
    pub fn new(corpus: Corpus, engine: Option<Engine>, store: AnnotationStore, default_k: usize) -> Self {
        AppState { corpus, engine, default_k, store: Mutex::new(store) }
    }

    /// Validates `cfg` and loads everything it names.
    pub fn from_config(cfg: &ServiceConfig) -> ServiceResult<Self> {
        cfg.validate()?;
        let corpus_dir = cfg.corpus.as_ref().expect("validated");
        let (corpus, _) = load_corpus_dir(corpus_dir)?;
        let engine = match (&cfg.checkpoint, &cfg.index) {
            (Some(c), Some(i)) => Some(Engine::new(Checkpoint::load(c)?, load_index(i)?)?),
            _ => None,
        };
        let store = AnnotationStore::open(&cfg.annotations)?;
        Ok(AppState::new(corpus, engine, store, cfg.default_k))
    }

    pub fn store(&self) -> std::sync::MutexGuard<'_, AnnotationStore> {
        // A panic while holding the lock cannot leave a half-written event
        // in memory: `append` records only after the line is synced.
        self.store.lock().unwrap_or_else(|p| p.into_inner())
    }
}

/// An error with the status code it maps to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

/// The match contract shared by `POST /match` and the `match` subcommand.
///
/// Missing or blank text, a missing direction and `k = 0` are 400s; no
/// engine is 503. `k` is clamped to the number of candidates.
pub fn run_match(
    engine: Option<&Engine>,
    corpus: Option<&Corpus>,
    req: &MatchRequest,
    default_k: usize,
) -> Result<MatchResponse, ApiError> {
    let text = req.text.as_deref().filter(|t| !t.trim().is_empty());
    let Some(text) = text else {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "missing text"));
    };
    let Some(direction) = req.direction else {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "missing direction"));
    };
    let k = req.k.unwrap_or(default_k);
    if k == 0 {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "k must be at least 1"));
    }
    let Some(engine) = engine else {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no index loaded"));
    };
    let target = direction.target();
    let k = k.min(engine.index.count(target));
    let hits = if k == 0 {
        Vec::new()
    } else {
        top_k(text, &engine.index, target, k, &engine.checkpoint).map_err(ApiError::internal)?.hits
    };
    let text_of = |id: &str| {
        corpus.and_then(|c| match target {
            ItemKind::Paragraph => c.paragraph(id).map(|p| p.text.clone()),
            ItemKind::Requirement => c.requirement(id).map(|r| r.description.clone()),
        })
    };
    let hits = hits
        .into_iter()
        .map(|h| WireHit { text: text_of(&h.item_id), id: h.item_id, score: Score(h.score) })
        .collect();
    Ok(MatchResponse { direction, k, hits })
}

fn parse<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed body: {e}")))
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let engine = state.engine.as_ref().map(|e| {
        json!({
            "checkpoint": e.checkpoint.fingerprint(),
            "requirements": e.index.count(ItemKind::Requirement),
            "paragraphs": e.index.count(ItemKind::Paragraph),
        })
    });
    Json(json!({
        "status": "ok",
        "index": engine,
        "annotation_events": state.store().events().len(),
    }))
}

async fn requirements(State(state): State<Arc<AppState>>) -> Json<Vec<RequirementView>> {
    let store = state.store();
    let views = state
        .corpus
        .requirements
        .iter()
        .map(|r| {
            let (accepted, rejected) = store.counts(&r.id);
            RequirementView {
                id: r.id.clone(),
                description: r.description.clone(),
                language: r.language.clone(),
                accepted,
                rejected,
            }
        })
        .collect();
    Json(views)
}

async fn match_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<MatchResponse>, ApiError> {
    let req: MatchRequest = parse(&body)?;
    // Embedding is CPU-bound; keep it off the async workers.
    let out = tokio::task::spawn_blocking(move || run_match(state.engine.as_ref(), Some(&state.corpus), &req, state.default_k))
        .await
        .map_err(ApiError::internal)??;
    Ok(Json(out))
}

async fn annotate(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<AnnotateResponse>, ApiError> {
    let ev: AnnotationEvent = parse(&body)?;
    if state.corpus.paragraph(&ev.paragraph_id).is_none() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("unknown paragraph id {:?}", ev.paragraph_id)));
    }
    if state.corpus.requirement(&ev.requirement_id).is_none() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("unknown requirement id {:?}", ev.requirement_id)));
    }
    let accepted = state.store().append(ev).map_err(ApiError::internal)?;
    Ok(Json(AnnotateResponse { accepted }))
}

async fn export(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    let body = annotations_tsv(&state.store().export());
    ([(header::CONTENT_TYPE, "text/tab-separated-values; charset=utf-8")], body)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/requirements", get(requirements))
        .route("/match", post(match_handler))
        .route("/annotations", post(annotate))
        .route("/annotations/export", get(export))
        .with_state(state)
}

/// Loads `cfg` and serves until Ctrl-C.
pub fn serve(cfg: &ServiceConfig) -> ServiceResult<()> {
    let state = Arc::new(AppState::from_config(cfg)?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&cfg.listen).await?;
        eprintln!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}
