use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParagraphRecord {
    pub id: String,
    pub text: String,
    pub report_id: String,
    pub language: String,
}

/// One checklist item, e.g. `C_1_1`. Ids are opaque strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementRecord {
    pub id: String,
    pub description: String,
    pub language: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub paragraph_id: String,
    pub requirement_id: String,
}

impl AnnotationRecord {
    pub fn new(paragraph_id: impl Into<String>, requirement_id: impl Into<String>) -> Self {
        AnnotationRecord { paragraph_id: paragraph_id.into(), requirement_id: requirement_id.into() }
    }
}

/// A validated corpus. Records are kept sorted by id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub paragraphs: Vec<ParagraphRecord>,
    pub requirements: Vec<RequirementRecord>,
    pub annotations: Vec<AnnotationRecord>,
}

impl Corpus {
    /// Sorts the records and checks uniqueness, non-empty text and
    /// referential integrity of every annotation.
    pub fn new(
        mut paragraphs: Vec<ParagraphRecord>,
        mut requirements: Vec<RequirementRecord>,
        mut annotations: Vec<AnnotationRecord>,
    ) -> Result<Self> {
        paragraphs.sort_by(|a, b| a.id.cmp(&b.id));
        requirements.sort_by(|a, b| a.id.cmp(&b.id));
        annotations.sort();
        for w in paragraphs.windows(2) {
            if w[0].id == w[1].id {
                bail!(Data, "duplicate paragraph id {}", w[0].id);
            }
        }
        for w in requirements.windows(2) {
            if w[0].id == w[1].id {
                bail!(Data, "duplicate requirement id {}", w[0].id);
            }
        }
        for w in annotations.windows(2) {
            if w[0] == w[1] {
                bail!(Data, "duplicate annotation {} -> {}", w[0].paragraph_id, w[0].requirement_id);
            }
        }
        if let Some(p) = paragraphs.iter().find(|p| p.id.is_empty() || p.text.trim().is_empty()) {
            bail!(Data, "paragraph {:?} has an empty id or text", p.id);
        }
        if let Some(r) = requirements.iter().find(|r| r.id.is_empty() || r.description.trim().is_empty()) {
            bail!(Data, "requirement {:?} has an empty id or description", r.id);
        }
        let corpus = Corpus { paragraphs, requirements, annotations };
        corpus.check_annotations(&corpus.annotations)?;
        Ok(corpus)
    }

    /// Checks that every annotation resolves against this corpus.
    pub fn check_annotations(&self, annotations: &[AnnotationRecord]) -> Result<()> {
        let pids: HashSet<&str> = self.paragraphs.iter().map(|p| p.id.as_str()).collect();
        let rids: HashSet<&str> = self.requirements.iter().map(|r| r.id.as_str()).collect();
        for a in annotations {
            if !pids.contains(a.paragraph_id.as_str()) {
                bail!(Data, "annotation references unknown paragraph {}", a.paragraph_id);
            }
            if !rids.contains(a.requirement_id.as_str()) {
                bail!(Data, "annotation references unknown requirement {}", a.requirement_id);
            }
        }
        Ok(())
    }

    pub fn paragraph(&self, id: &str) -> Option<&ParagraphRecord> {
        self.paragraphs.binary_search_by(|p| p.id.as_str().cmp(id)).ok().map(|i| &self.paragraphs[i])
    }

    pub fn requirement(&self, id: &str) -> Option<&RequirementRecord> {
        self.requirements.binary_search_by(|r| r.id.as_str().cmp(id)).ok().map(|i| &self.requirements[i])
    }

    /// Gold requirement ids per annotated paragraph.
    pub fn gold(&self) -> HashMap<String, HashSet<String>> {
        let mut gold: HashMap<String, HashSet<String>> = HashMap::new();
        for a in &self.annotations {
            gold.entry(a.paragraph_id.clone()).or_default().insert(a.requirement_id.clone());
        }
        gold
    }

    /// Paragraphs with no annotation at all.
    pub fn unannotated_paragraphs(&self) -> impl Iterator<Item = &ParagraphRecord> {
        let annotated: HashSet<&str> = self.annotations.iter().map(|a| a.paragraph_id.as_str()).collect();
        self.paragraphs.iter().filter(move |p| !annotated.contains(p.id.as_str()))
    }
}
