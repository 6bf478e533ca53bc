//! Index directory: `manifest.json`, `ids.tsv` (kind, id, text hash per
//! line, in entry order) and `embeddings.bin` (one `[n, dim]` tensor in the
//! checkpoint payload layout; absent when the index is empty).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::index::{EmbeddingIndex, IndexEntry, ItemKind};
use crate::encoder::SentenceEmbedding;
use crate::error::{bail, Result};
use crate::numcore::Tensor;

const MANIFEST: &str = "manifest.json";
const IDS: &str = "ids.tsv";
const EMBEDDINGS: &str = "embeddings.bin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub checkpoint_fingerprint: String,
    pub dimension: usize,
    pub counts: BTreeMap<ItemKind, usize>,
}

pub fn save_index(index: &EmbeddingIndex, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut counts = BTreeMap::new();
    for kind in [ItemKind::Paragraph, ItemKind::Requirement] {
        counts.insert(kind, index.count(kind));
    }
    let manifest =
        IndexManifest { checkpoint_fingerprint: index.fingerprint().to_owned(), dimension: index.dim(), counts };
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    let mut ids = String::new();
    for e in index.entries() {
        if e.item_id.contains(['\t', '\n', '\r']) {
            bail!(Data, "item id {:?} cannot be stored", e.item_id);
        }
        ids.push_str(&format!("{}\t{}\t{}\n", e.kind, e.item_id, e.text_hash));
    }
    fs::write(dir.join(IDS), ids)?;
    let path = dir.join(EMBEDDINGS);
    if index.is_empty() {
        if path.exists() {
            fs::remove_file(path)?;
        }
        return Ok(());
    }
    let data: Vec<f32> = index.entries().iter().flat_map(|e| e.embedding.as_slice().iter().copied()).collect();
    let mut w = BufWriter::new(fs::File::create(path)?);
    Tensor::new(vec![index.len(), index.dim()], data)?.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_index(dir: &Path) -> Result<EmbeddingIndex> {
    let manifest: IndexManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)?;
    let ids = fs::read_to_string(dir.join(IDS))?;
    let mut rows = Vec::new();
    for (i, line) in ids.lines().enumerate() {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            bail!(Data, "{IDS}:{}: expected 3 fields", i + 1);
        }
        rows.push((f[0].parse::<ItemKind>()?, f[1].to_owned(), f[2].to_owned()));
    }
    let mut entries = Vec::with_capacity(rows.len());
    if !rows.is_empty() {
        let t: Tensor<f32> = Tensor::read_from(&mut BufReader::new(fs::File::open(dir.join(EMBEDDINGS))?))?;
        if t.shape() != [rows.len(), manifest.dimension] {
            bail!(Data, "embedding payload has shape {:?}, expected [{}, {}]", t.shape(), rows.len(), manifest.dimension);
        }
        for (i, (kind, item_id, text_hash)) in rows.into_iter().enumerate() {
            entries.push(IndexEntry { item_id, kind, embedding: SentenceEmbedding::new(t.row(i).to_vec())?, text_hash });
        }
    }
    let index = EmbeddingIndex::from_entries(entries, manifest.checkpoint_fingerprint, manifest.dimension)?;
    for (kind, &n) in &manifest.counts {
        if index.count(*kind) != n {
            bail!(Data, "manifest declares {n} {kind} entries, found {}", index.count(*kind));
        }
    }
    Ok(index)
}
