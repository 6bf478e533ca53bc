use std::collections::HashSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::records::Corpus;
use crate::evalkit::DatasetSplit;

/// Whitespace-token count.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub name: String,
    pub paragraphs: usize,
    pub words: usize,
    pub requirements: usize,
}

/// Paragraph, word and distinct-requirement counts per split.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub rows: Vec<StatsRow>,
    pub checklist_size: usize,
}

impl CorpusStats {
    pub fn row(&self, name: &str) -> Option<&StatsRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Aligned table: one split per row, three numeric columns.
    pub fn render_table(&self) -> String {
        let w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
        let mut s = String::new();
        let _ = writeln!(s, "{:<w$}  {:>10}  {:>10}  {:>12}", "Split", "Paragraphs", "Words", "Requirements");
        for r in &self.rows {
            let _ = writeln!(s, "{:<w$}  {:>10}  {:>10}  {:>12}", r.name, r.paragraphs, r.words, r.requirements);
        }
        s
    }
}

/// One row per split, plus an `unannotated` row for paragraphs that carry no
/// annotation (distractors and raw text).
pub fn corpus_stats(corpus: &Corpus, splits: &[DatasetSplit]) -> CorpusStats {
    let words_of = |pid: &str| corpus.paragraph(pid).map_or(0, |p| word_count(&p.text));
    let mut rows: Vec<StatsRow> = splits
        .iter()
        .map(|s| {
            let pids: HashSet<&str> = s.records.iter().map(|r| r.paragraph_id.as_str()).collect();
            let rids: HashSet<&str> = s.records.iter().map(|r| r.requirement_id.as_str()).collect();
            StatsRow {
                name: s.name.to_string(),
                paragraphs: pids.len(),
                words: pids.iter().map(|p| words_of(p)).sum(),
                requirements: rids.len(),
            }
        })
        .collect();
    let (n, words) = corpus.unannotated_paragraphs().fold((0, 0), |(n, w), p| (n + 1, w + word_count(&p.text)));
    rows.push(StatsRow { name: "unannotated".into(), paragraphs: n, words, requirements: 0 });
    CorpusStats { rows, checklist_size: corpus.requirements.len() }
}
