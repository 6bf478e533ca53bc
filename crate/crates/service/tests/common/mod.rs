//! Shared fixtures: a small synthetic corpus, an untrained checkpoint and
//! an index over both sides.

#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use auditmatch::corpus::{generate_synthetic, Corpus, SynthConfig};
use auditmatch::encoder::{Checkpoint, EncoderConfig};
use auditmatch::matcher::{build_index, EmbeddingIndex, IndexItem, ItemKind};
use auditmatch::textprep::train_vocab;
use auditmatch_service::http::{router, AppState, Engine};
use auditmatch_service::store::AnnotationStore;
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use tower::ServiceExt;

pub fn small_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        n_requirements: 10,
        paragraphs_per_requirement: 4,
        vocab_themes: 12,
        unlabeled_per_theme: 2,
        ..Default::default()
    }
}

pub fn small_corpus(seed: u64) -> Corpus {
    generate_synthetic(&small_synth(seed)).unwrap().corpus
}

pub fn tiny_encoder(vocab_size: usize) -> EncoderConfig {
    EncoderConfig { vocab_size, hidden_dim: 16, num_layers: 1, num_heads: 2, ff_dim: 32, max_len: 64, dropout_prob: 0.1 }
}

pub fn checkpoint_for(corpus: &Corpus, seed: u64) -> Checkpoint {
    let texts = corpus.paragraphs.iter().map(|p| p.text.as_str()).chain(corpus.requirements.iter().map(|r| r.description.as_str()));
    let vocab = train_vocab(texts, 400, 1).unwrap();
    Checkpoint::init(tiny_encoder(vocab.len()), vocab, seed).unwrap()
}

pub fn full_index(corpus: &Corpus, ck: &Checkpoint) -> EmbeddingIndex {
    let items: Vec<IndexItem> = corpus
        .requirements
        .iter()
        .map(|r| IndexItem::new(r.id.clone(), ItemKind::Requirement, r.description.clone()))
        .chain(corpus.paragraphs.iter().map(|p| IndexItem::new(p.id.clone(), ItemKind::Paragraph, p.text.clone())))
        .collect();
    build_index(&items, ck).unwrap()
}

pub struct Fixture {
    pub corpus: Corpus,
    pub checkpoint: Checkpoint,
    pub index: EmbeddingIndex,
    pub state: Arc<AppState>,
}

pub fn fixture(dir: &Path, with_engine: bool) -> Fixture {
    let corpus = small_corpus(3);
    let checkpoint = checkpoint_for(&corpus, 5);
    let index = full_index(&corpus, &checkpoint);
    let engine = with_engine.then(|| Engine::new(checkpoint.clone(), index.clone()).unwrap());
    let store = AnnotationStore::open(&dir.join("annotations.jsonl")).unwrap();
    let state = Arc::new(AppState::new(corpus.clone(), engine, store, 5));
    Fixture { corpus, checkpoint, index, state }
}

/// Sends one request through the router; returns status and body bytes.
pub async fn call(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map_or_else(Body::empty, Body::from)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub fn app(state: &Arc<AppState>) -> Router {
    router(state.clone())
}
