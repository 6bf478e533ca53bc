//! Append-only JSONL store of auditor verdicts.
//!
//! Every accepted event is one line, flushed and synced before `append`
//! returns. The full history stays on disk; the effective state of a
//! (paragraph, requirement) pair is its latest verdict.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use auditmatch::corpus::AnnotationRecord;
use serde::{Deserialize, Serialize};

use crate::error::{ServiceError, ServiceResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    #[default]
    Ui,
    Cli,
    Import,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationEvent {
    pub paragraph_id: String,
    pub requirement_id: String,
    pub verdict: Verdict,
    /// Milliseconds since the Unix epoch. Filled in by the store when a
    /// client leaves it out.
    #[serde(default)]
    pub timestamp: Option<u64>,
    #[serde(default)]
    pub source: Source,
}

impl AnnotationEvent {
    pub fn new(paragraph_id: impl Into<String>, requirement_id: impl Into<String>, verdict: Verdict) -> Self {
        AnnotationEvent {
            paragraph_id: paragraph_id.into(),
            requirement_id: requirement_id.into(),
            verdict,
            timestamp: None,
            source: Source::default(),
        }
    }

    fn pair(&self) -> (String, String) {
        (self.paragraph_id.clone(), self.requirement_id.clone())
    }
}

fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

#[derive(Debug)]
pub struct AnnotationStore {
    path: PathBuf,
    file: File,
    events: Vec<AnnotationEvent>,
    latest: BTreeMap<(String, String), Verdict>,
}

impl AnnotationStore {
    /// Opens `path` for appending, replaying whatever it already holds.
    pub fn open(path: &Path) -> ServiceResult<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let text = fs::read_to_string(path)?;
        let mut store = AnnotationStore { path: path.to_owned(), file, events: Vec::new(), latest: BTreeMap::new() };
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ev: AnnotationEvent = serde_json::from_str(line)
                .map_err(|e| ServiceError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
            store.record(ev);
        }
        Ok(store)
    }

    fn record(&mut self, ev: AnnotationEvent) {
        self.latest.insert(ev.pair(), ev.verdict);
        self.events.push(ev);
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Full history, oldest first.
    pub fn events(&self) -> &[AnnotationEvent] {
        &self.events
    }

    /// Current verdict per (paragraph, requirement) pair.
    pub fn latest(&self) -> &BTreeMap<(String, String), Verdict> {
        &self.latest
    }

    /// Appends `ev` unless it repeats the pair's current verdict, in which
    /// case nothing is written and `false` comes back.
    pub fn append(&mut self, mut ev: AnnotationEvent) -> ServiceResult<bool> {
        if self.latest.get(&ev.pair()) == Some(&ev.verdict) {
            return Ok(false);
        }
        ev.timestamp.get_or_insert_with(now_millis);
        let mut line = serde_json::to_string(&ev)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        self.record(ev);
        Ok(true)
    }

    /// Accepted pairs in the corpus annotation format, sorted by paragraph
    /// then requirement id.
    pub fn export(&self) -> Vec<AnnotationRecord> {
        self.latest
            .iter()
            .filter(|(_, v)| **v == Verdict::Accept)
            .map(|((p, r), _)| AnnotationRecord::new(p.clone(), r.clone()))
            .collect()
    }

    /// (accepted, rejected) pair counts for `requirement_id`.
    pub fn counts(&self, requirement_id: &str) -> (usize, usize) {
        self.latest.iter().filter(|((_, r), _)| r == requirement_id).fold((0, 0), |(a, r), (_, v)| match v {
            Verdict::Accept => (a + 1, r),
            Verdict::Reject => (a, r + 1),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> (tempfile::TempDir, AnnotationStore) {
        let dir = tempfile::tempdir().unwrap();
        let s = AnnotationStore::open(&dir.path().join("a.jsonl")).unwrap();
        (dir, s)
    }

    #[test]
    fn empty_store_exports_nothing() {
        let (_d, s) = store();
        assert!(s.export().is_empty());
    }

    #[test]
    fn replaying_an_event_leaves_the_file_alone() {
        let (_d, mut s) = store();
        let ev = AnnotationEvent::new("P1", "A_1_1", Verdict::Accept);
        assert!(s.append(ev.clone()).unwrap());
        let before = fs::read(s.path()).unwrap();
        assert!(!s.append(ev).unwrap());
        assert_eq!(fs::read(s.path()).unwrap(), before);
        assert_eq!(s.export(), vec![AnnotationRecord::new("P1", "A_1_1")]);
    }

    #[test]
    fn latest_verdict_wins_and_history_is_kept() {
        let (_d, mut s) = store();
        s.append(AnnotationEvent::new("P1", "A_1_1", Verdict::Accept)).unwrap();
        s.append(AnnotationEvent::new("P1", "A_1_1", Verdict::Reject)).unwrap();
        assert!(s.export().is_empty());
        s.append(AnnotationEvent::new("P1", "A_1_1", Verdict::Accept)).unwrap();
        assert_eq!(s.export().len(), 1);
        assert_eq!(s.events().len(), 3);
        assert_eq!(s.counts("A_1_1"), (1, 0));
    }

    #[test]
    fn reopening_replays_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        {
            let mut s = AnnotationStore::open(&path).unwrap();
            s.append(AnnotationEvent::new("P2", "B_1_1", Verdict::Accept)).unwrap();
            s.append(AnnotationEvent::new("P1", "B_1_1", Verdict::Reject)).unwrap();
        }
        let s = AnnotationStore::open(&path).unwrap();
        assert_eq!(s.events().len(), 2);
        assert!(s.events().iter().all(|e| e.timestamp.is_some()));
        assert_eq!(s.counts("B_1_1"), (1, 1));
    }

    #[test]
    fn corrupt_line_names_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        fs::write(&path, "{\"paragraph_id\":\"P\",\"requirement_id\":\"R\",\"verdict\":\"accept\"}\nnot json\n").unwrap();
        let e = AnnotationStore::open(&path).unwrap_err().to_string();
        assert!(e.contains("a.jsonl:2"), "{e}");
    }
}
