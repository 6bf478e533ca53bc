use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoder::{encode_text, Checkpoint, SentenceEmbedding};
use crate::error::{bail, Error, Result};
use crate::util::sha256_hex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Paragraph,
    Requirement,
}

impl ItemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ItemKind::Paragraph => "paragraph",
            ItemKind::Requirement => "requirement",
        }
    }
}

impl fmt::Display for ItemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ItemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paragraph" => Ok(ItemKind::Paragraph),
            "requirement" => Ok(ItemKind::Requirement),
            _ => Err(Error::Data(format!("unknown item kind {s:?}"))),
        }
    }
}

/// Input to [`build_index`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexItem {
    pub id: String,
    pub kind: ItemKind,
    pub text: String,
}

impl IndexItem {
    pub fn new(id: impl Into<String>, kind: ItemKind, text: impl Into<String>) -> Self {
        IndexItem { id: id.into(), kind, text: text.into() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndexEntry {
    pub item_id: String,
    pub kind: ItemKind,
    pub embedding: SentenceEmbedding,
    pub text_hash: String,
}

/// Embedded items in input order, tagged with the producing checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingIndex {
    entries: Vec<IndexEntry>,
    fingerprint: String,
    dim: usize,
}

pub(crate) fn text_hash(text: &str) -> String {
    sha256_hex(text.as_bytes())[..16].to_owned()
}

impl EmbeddingIndex {
    /// Assembles an index from precomputed entries. Ids must be unique per
    /// kind and every embedding must have `dim` components.
    pub fn from_entries(entries: Vec<IndexEntry>, fingerprint: impl Into<String>, dim: usize) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert((e.kind, e.item_id.as_str())) {
                bail!(Data, "duplicate {} id {}", e.kind, e.item_id);
            }
            if e.embedding.dim() != dim {
                bail!(Shape, "{} {} has dimension {}, index expects {dim}", e.kind, e.item_id, e.embedding.dim());
            }
        }
        Ok(EmbeddingIndex { entries, fingerprint: fingerprint.into(), dim })
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, kind: ItemKind) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }

    pub fn get(&self, kind: ItemKind, id: &str) -> Option<&IndexEntry> {
        self.entries.iter().find(|e| e.kind == kind && e.item_id == id)
    }
}

/// Embeds every item with `checkpoint`. Entry order is input order.
pub fn build_index(items: &[IndexItem], checkpoint: &Checkpoint) -> Result<EmbeddingIndex> {
    let mut seen = HashSet::new();
    for it in items {
        if !seen.insert((it.kind, it.id.as_str())) {
            bail!(Data, "duplicate {} id {}", it.kind, it.id);
        }
    }
    let entries = items
        .iter()
        .map(|it| {
            Ok(IndexEntry {
                item_id: it.id.clone(),
                kind: it.kind,
                embedding: encode_text(&it.text, checkpoint)?,
                text_hash: text_hash(&it.text),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EmbeddingIndex::from_entries(entries, checkpoint.fingerprint(), checkpoint.config().hidden_dim)
}
