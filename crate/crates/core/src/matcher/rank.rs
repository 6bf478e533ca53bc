use serde::{Deserialize, Serialize};

use super::index::{EmbeddingIndex, ItemKind};
use crate::encoder::{cosine_similarity, encode_text, Checkpoint, SentenceEmbedding};
use crate::error::{bail, Result};

/// Recommendations per query when the caller does not say otherwise.
pub const DEFAULT_K: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub item_id: String,
    pub score: f32,
}

/// Hits by descending score, ties by ascending id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub hits: Vec<Hit>,
    pub k_requested: usize,
}

/// Scores `query` against every entry of `target` and keeps the best `k`.
pub fn top_k_embedding(
    query_id: &str,
    query: &SentenceEmbedding,
    index: &EmbeddingIndex,
    target: ItemKind,
    k: usize,
) -> Result<RankedList> {
    if k == 0 {
        bail!(Usage, "k must be at least 1");
    }
    let mut hits = index
        .entries()
        .iter()
        .filter(|e| e.kind == target)
        .map(|e| Ok(Hit { item_id: e.item_id.clone(), score: cosine_similarity(query, &e.embedding)? }))
        .collect::<Result<Vec<_>>>()?;
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.item_id.cmp(&b.item_id)));
    hits.truncate(k);
    Ok(RankedList { query_id: query_id.to_owned(), hits, k_requested: k })
}

/// Embeds `query_text` and ranks the `target` entries of `index`.
pub fn top_k(
    query_text: &str,
    index: &EmbeddingIndex,
    target: ItemKind,
    k: usize,
    checkpoint: &Checkpoint,
) -> Result<RankedList> {
    if k == 0 {
        bail!(Usage, "k must be at least 1");
    }
    if index.fingerprint() != checkpoint.fingerprint() {
        bail!(Usage, "index was built by checkpoint {}, not {}", index.fingerprint(), checkpoint.fingerprint());
    }
    let q = encode_text(query_text, checkpoint)?;
    top_k_embedding("", &q, index, target, k)
}

pub fn recommend_requirements(
    paragraph_text: &str,
    index: &EmbeddingIndex,
    checkpoint: &Checkpoint,
    k: usize,
) -> Result<RankedList> {
    top_k(paragraph_text, index, ItemKind::Requirement, k, checkpoint)
}

pub fn recommend_paragraphs(
    requirement_text: &str,
    index: &EmbeddingIndex,
    checkpoint: &Checkpoint,
    k: usize,
) -> Result<RankedList> {
    top_k(requirement_text, index, ItemKind::Paragraph, k, checkpoint)
}
