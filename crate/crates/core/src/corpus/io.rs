//! Line-delimited storage. One record per line, tab-separated fields,
//! UTF-8. Field order:
//!
//! - paragraphs: `id  report_id  language  text`
//! - requirements: `id  language  description`
//! - annotations: `paragraph_id  requirement_id`
//!
//! Tabs, newlines, carriage returns and backslashes inside fields are
//! written as `\t`, `\n`, `\r` and `\\`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::records::{AnnotationRecord, Corpus, ParagraphRecord, RequirementRecord};
use crate::error::{bail, Error, Result};

pub const MANIFEST_FILE: &str = "corpus.json";

/// Locations of the three record files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusPaths {
    pub paragraphs: PathBuf,
    pub requirements: PathBuf,
    pub annotations: PathBuf,
}

/// How to derive the evaluation splits for a corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub unseen: Vec<String>,
    pub fractions: [f64; 3],
    pub seed: u64,
}

/// `corpus.json`: names the record files and the checklist size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub paragraphs: String,
    pub requirements: String,
    pub annotations: String,
    pub checklist_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splits: Option<SplitPlan>,
}

impl CorpusManifest {
    pub fn standard(checklist_size: usize, splits: Option<SplitPlan>) -> Self {
        CorpusManifest {
            paragraphs: "paragraphs.tsv".into(),
            requirements: "requirements.tsv".into(),
            annotations: "annotations.tsv".into(),
            checklist_size,
            splits,
        }
    }

    pub fn paths(&self, dir: &Path) -> CorpusPaths {
        CorpusPaths {
            paragraphs: dir.join(&self.paragraphs),
            requirements: dir.join(&self.requirements),
            annotations: dir.join(&self.annotations),
        }
    }
}

fn escape(field: &str) -> String {
    let mut s = String::with_capacity(field.len());
    for c in field.chars() {
        match c {
            '\\' => s.push_str("\\\\"),
            '\t' => s.push_str("\\t"),
            '\n' => s.push_str("\\n"),
            '\r' => s.push_str("\\r"),
            _ => s.push(c),
        }
    }
    s
}

fn unescape(field: &str, file: &Path, line: usize) -> Result<String> {
    let mut s = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            s.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => s.push('\\'),
            Some('t') => s.push('\t'),
            Some('n') => s.push('\n'),
            Some('r') => s.push('\r'),
            other => bail!(Data, "{}:{line}: bad escape sequence \\{}", file.display(), other.map_or(String::new(), String::from)),
        }
    }
    Ok(s)
}

fn read_rows(path: &Path, arity: usize) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::InvalidData => Error::Data(format!("{}: not valid UTF-8", path.display())),
        _ => Error::Io(e),
    })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != arity {
            bail!(Data, "{}:{}: expected {arity} tab-separated fields, found {}", path.display(), i + 1, fields.len());
        }
        rows.push(fields.iter().map(|f| unescape(f, path, i + 1)).collect::<Result<_>>()?);
    }
    Ok(rows)
}

fn render_rows<'a>(rows: impl Iterator<Item = Vec<&'a str>>) -> String {
    let mut out = String::new();
    for row in rows {
        let fields: Vec<String> = row.iter().map(|f| escape(f)).collect();
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    out
}

fn write_rows<'a>(path: &Path, rows: impl Iterator<Item = Vec<&'a str>>) -> Result<()> {
    fs::write(path, render_rows(rows))?;
    Ok(())
}

fn parse_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    Ok(read_rows(path, 2)?
        .into_iter()
        .map(|mut f| {
            let requirement_id = f.pop().unwrap();
            AnnotationRecord { paragraph_id: f.pop().unwrap(), requirement_id }
        })
        .collect())
}

/// Loads and validates the three record files.
pub fn load_corpus(paths: &CorpusPaths) -> Result<Corpus> {
    let paragraphs = read_rows(&paths.paragraphs, 4)?
        .into_iter()
        .map(|f| {
            let mut f = f.into_iter();
            let (id, report_id, language, text) = (f.next().unwrap(), f.next().unwrap(), f.next().unwrap(), f.next().unwrap());
            ParagraphRecord { id, text, report_id, language }
        })
        .collect();
    let requirements = read_rows(&paths.requirements, 3)?
        .into_iter()
        .map(|f| {
            let mut f = f.into_iter();
            let (id, language, description) = (f.next().unwrap(), f.next().unwrap(), f.next().unwrap());
            RequirementRecord { id, description, language }
        })
        .collect();
    let annotations = parse_annotations(&paths.annotations)?;
    Corpus::new(paragraphs, requirements, annotations)
}

/// Reads an annotation file and checks it against `corpus`.
pub fn load_annotations(path: &Path, corpus: &Corpus) -> Result<Vec<AnnotationRecord>> {
    let mut annotations = parse_annotations(path)?;
    annotations.sort();
    if let Some(w) = annotations.windows(2).find(|w| w[0] == w[1]) {
        bail!(Data, "duplicate annotation {} -> {}", w[0].paragraph_id, w[0].requirement_id);
    }
    corpus.check_annotations(&annotations)?;
    Ok(annotations)
}

/// Annotation file contents for `annotations`, in the given order.
pub fn annotations_tsv(annotations: &[AnnotationRecord]) -> String {
    render_rows(annotations.iter().map(|a| vec![a.paragraph_id.as_str(), a.requirement_id.as_str()]))
}

pub fn write_annotations(path: &Path, annotations: &[AnnotationRecord]) -> Result<()> {
    fs::write(path, annotations_tsv(annotations))?;
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, paths: &CorpusPaths) -> Result<()> {
    write_rows(
        &paths.paragraphs,
        corpus.paragraphs.iter().map(|p| vec![p.id.as_str(), p.report_id.as_str(), p.language.as_str(), p.text.as_str()]),
    )?;
    write_rows(
        &paths.requirements,
        corpus.requirements.iter().map(|r| vec![r.id.as_str(), r.language.as_str(), r.description.as_str()]),
    )?;
    write_annotations(&paths.annotations, &corpus.annotations)
}

/// Writes the three files plus `corpus.json` into `dir`.
pub fn save_corpus_dir(corpus: &Corpus, dir: &Path, manifest: &CorpusManifest) -> Result<()> {
    fs::create_dir_all(dir)?;
    save_corpus(corpus, &manifest.paths(dir))?;
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}

pub fn load_corpus_dir(dir: &Path) -> Result<(Corpus, CorpusManifest)> {
    let manifest: CorpusManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    let corpus = load_corpus(&manifest.paths(dir))?;
    if manifest.checklist_size < corpus.requirements.len() {
        bail!(Data, "checklist_size {} is below the {} requirements on file", manifest.checklist_size, corpus.requirements.len());
    }
    Ok((corpus, manifest))
}
