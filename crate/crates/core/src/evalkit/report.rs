use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::recall::one_shot_recall;
use super::splits::{DatasetSplit, SplitName};
use crate::corpus::{Corpus, ParagraphRecord};
use crate::encoder::{encode_text, Checkpoint, SentenceEmbedding};
use crate::error::{bail, Result};
use crate::matcher::{build_index, top_k_embedding, EmbeddingIndex, IndexItem, ItemKind, RankedList};

/// Language column that pools every language of a split.
pub const ALL_LANGUAGES: &str = "all";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub split: SplitName,
    pub language: String,
    pub recall: f64,
    pub samples: usize,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub provenance: String,
    pub k: usize,
    pub cells: Vec<EvalCell>,
}

impl EvalReport {
    pub fn cell(&self, split: SplitName, language: &str) -> Option<&EvalCell> {
        self.cells.iter().find(|c| c.split == split && c.language == language)
    }

    /// Pooled recall of a split, if it was evaluated.
    pub fn recall(&self, split: SplitName) -> Option<f64> {
        self.cell(split, ALL_LANGUAGES).map(|c| c.recall)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Ranks each paragraph of each split against every requirement in `index`
/// and reports recall@k per (split, language) plus a pooled cell per split.
/// Splits without records produce no cells.
pub fn evaluate_embeddings<F>(
    index: &EmbeddingIndex,
    mut embed: F,
    corpus: &Corpus,
    splits: &[DatasetSplit],
    k: usize,
    provenance: &str,
) -> Result<EvalReport>
where
    F: FnMut(&ParagraphRecord) -> Result<SentenceEmbedding>,
{
    let mut cells = Vec::new();
    for split in splits {
        let mut gold: HashMap<String, HashSet<String>> = HashMap::new();
        for r in &split.records {
            if index.get(ItemKind::Requirement, &r.requirement_id).is_none() {
                bail!(Data, "requirement {} has no indexed description", r.requirement_id);
            }
            gold.entry(r.paragraph_id.clone()).or_default().insert(r.requirement_id.clone());
        }
        let mut by_language: Vec<(String, RankedList)> = Vec::new();
        for pid in split.paragraph_ids() {
            let Some(p) = corpus.paragraph(pid) else {
                bail!(Data, "split {} references unknown paragraph {pid}", split.name);
            };
            let list = top_k_embedding(pid, &embed(p)?, index, ItemKind::Requirement, k)?;
            by_language.push((p.language.clone(), list));
        }
        if by_language.is_empty() {
            continue;
        }
        let languages: BTreeSet<&str> = by_language.iter().map(|(l, _)| l.as_str()).collect();
        for lang in languages.into_iter().chain([ALL_LANGUAGES]) {
            let lists: Vec<RankedList> = by_language
                .iter()
                .filter(|(l, _)| lang == ALL_LANGUAGES || l == lang)
                .map(|(_, r)| r.clone())
                .collect();
            cells.push(EvalCell {
                split: split.name,
                language: lang.to_owned(),
                recall: one_shot_recall(&lists, &gold, k)?,
                samples: lists.len(),
                k,
            });
        }
    }
    Ok(EvalReport { provenance: provenance.to_owned(), k, cells })
}

/// Indexes every requirement of the checklist, seen and unseen alike, and
/// evaluates the test splits among `splits`.
pub fn evaluate_checkpoint(checkpoint: &Checkpoint, corpus: &Corpus, splits: &[DatasetSplit], k: usize) -> Result<EvalReport> {
    let tests: Vec<DatasetSplit> = splits.iter().filter(|s| s.name.is_test()).cloned().collect();
    if tests.is_empty() {
        bail!(Usage, "no test split to evaluate");
    }
    let items: Vec<IndexItem> = corpus
        .requirements
        .iter()
        .map(|r| IndexItem::new(r.id.clone(), ItemKind::Requirement, r.description.clone()))
        .collect();
    let index = build_index(&items, checkpoint)?;
    evaluate_embeddings(&index, |p| encode_text(&p.text, checkpoint), corpus, &tests, k, &checkpoint.provenance_label())
}

/// Aligned table with one row per report and one column per
/// (split, language) cell.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut columns: Vec<(SplitName, String)> = Vec::new();
    for r in reports {
        for c in &r.cells {
            if !columns.iter().any(|(s, l)| *s == c.split && *l == c.language) {
                columns.push((c.split, c.language.clone()));
            }
        }
    }
    let heads: Vec<String> = columns.iter().map(|(s, l)| format!("{s}/{l}")).collect();
    let w0 = reports.iter().map(|r| r.provenance.chars().count()).chain([6]).max().unwrap();
    let mut out = String::new();
    let _ = write!(out, "{:<w0$}", "recipe");
    for h in &heads {
        let _ = write!(out, "  {h:>w$}", w = h.len().max(6));
    }
    out.push('\n');
    for r in reports {
        let pad = w0 - r.provenance.chars().count();
        let _ = write!(out, "{}{}", r.provenance, " ".repeat(pad));
        for ((s, l), h) in columns.iter().zip(&heads) {
            let v = r.cell(*s, l).map_or("-".to_owned(), |c| format!("{:.3}", c.recall));
            let _ = write!(out, "  {v:>w$}", w = h.len().max(6));
        }
        out.push('\n');
    }
    out
}
