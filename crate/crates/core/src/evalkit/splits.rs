use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{bail, Error, Result};
use crate::util::rng_for;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Val,
    TestSeen,
    TestUnseen,
}

impl SplitName {
    pub const ALL: [SplitName; 4] = [SplitName::Train, SplitName::Val, SplitName::TestSeen, SplitName::TestUnseen];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::TestSeen => "test_seen",
            SplitName::TestUnseen => "test_unseen",
        }
    }

    pub fn is_test(self) -> bool {
        matches!(self, SplitName::TestSeen | SplitName::TestUnseen)
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SplitName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Usage(format!("unknown split {s:?}; expected train, val, test_seen or test_unseen")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub paragraph_id: String,
    pub requirement_id: String,
    pub language: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub records: Vec<SplitRecord>,
}

impl DatasetSplit {
    /// Distinct paragraph ids in record order.
    pub fn paragraph_ids(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.records.iter().map(|r| r.paragraph_id.as_str()).filter(|p| seen.insert(*p)).collect()
    }

    pub fn requirement_ids(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.requirement_id.as_str()).collect()
    }
}

/// Builds train / val / test_seen / test_unseen.
///
/// Every paragraph annotated with any unseen requirement lands in
/// test_unseen, carrying only its unseen annotations. The remaining
/// annotated paragraphs are shuffled and cut by `fractions`; a val or
/// test_seen paragraph whose requirements are not all in train is moved to
/// train so that seen evaluation only asks about trained requirements.
pub fn make_splits(corpus: &Corpus, unseen: &[String], fractions: [f64; 3], seed: u64) -> Result<Vec<DatasetSplit>> {
    if fractions.iter().any(|&f| f.is_nan() || f <= 0.0) || fractions.iter().sum::<f64>() > 1.0 + 1e-9 {
        bail!(Usage, "split fractions must be positive and sum to at most 1, got {fractions:?}");
    }
    let unseen: BTreeSet<&str> = unseen.iter().map(String::as_str).collect();
    if let Some(id) = unseen.iter().find(|id| corpus.requirement(id).is_none()) {
        bail!(Data, "unseen requirement {id} is not in the checklist");
    }
    let mut by_paragraph: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for a in &corpus.annotations {
        by_paragraph.entry(&a.paragraph_id).or_default().push(&a.requirement_id);
    }
    let annotated: BTreeSet<&str> = by_paragraph.values().flatten().copied().collect();
    if !annotated.is_empty() && annotated.iter().all(|r| unseen.contains(r)) {
        bail!(Data, "the unseen set covers every annotated requirement");
    }

    let language = |pid: &str| corpus.paragraph(pid).map(|p| p.language.clone()).unwrap_or_default();
    let records_for = |pid: &str, reqs: &[&str]| -> Vec<SplitRecord> {
        reqs.iter()
            .map(|r| SplitRecord { paragraph_id: pid.to_owned(), requirement_id: (*r).to_owned(), language: language(pid) })
            .collect()
    };

    let mut test_unseen = Vec::new();
    let mut pool = Vec::new();
    for (&pid, reqs) in &by_paragraph {
        let hidden: Vec<&str> = reqs.iter().copied().filter(|r| unseen.contains(r)).collect();
        if hidden.is_empty() {
            pool.push(pid);
        } else {
            test_unseen.extend(records_for(pid, &hidden));
        }
    }
    pool.shuffle(&mut rng_for(seed, &[0x5b11]));
    let n = pool.len() as f64;
    let cut1 = (fractions[0] * n).round() as usize;
    let cut2 = ((fractions[0] + fractions[1]) * n).round() as usize;
    let cut3 = (((fractions[0] + fractions[1] + fractions[2]) * n).round() as usize).min(pool.len());

    let mut train: Vec<&str> = pool[..cut1].to_vec();
    let mut trained: HashSet<&str> = train.iter().flat_map(|p| by_paragraph[p].iter().copied()).collect();
    let mut kept: [Vec<&str>; 2] = [Vec::new(), Vec::new()];
    for (slot, range) in [(0, cut1..cut2), (1, cut2..cut3)] {
        for &pid in &pool[range] {
            if by_paragraph[pid].iter().all(|r| trained.contains(r)) {
                kept[slot].push(pid);
            } else {
                trained.extend(by_paragraph[pid].iter().copied());
                train.push(pid);
            }
        }
    }
    let [val, test_seen] = kept;

    let build = |name, ids: &[&str]| DatasetSplit {
        name,
        records: ids.iter().flat_map(|pid| records_for(pid, &by_paragraph[pid])).collect(),
    };
    let splits = vec![
        build(SplitName::Train, &train),
        build(SplitName::Val, &val),
        build(SplitName::TestSeen, &test_seen),
        DatasetSplit { name: SplitName::TestUnseen, records: test_unseen },
    ];
    check_splits(&splits, &unseen.iter().map(|s| s.to_string()).collect::<Vec<_>>())?;
    Ok(splits)
}

/// Verifies paragraph disjointness, test_seen ⊆ train and the exclusion of
/// unseen requirements from every other split.
pub fn check_splits(splits: &[DatasetSplit], unseen: &[String]) -> Result<()> {
    let unseen: HashSet<&str> = unseen.iter().map(String::as_str).collect();
    let mut owner: BTreeMap<&str, SplitName> = BTreeMap::new();
    for s in splits {
        for pid in s.paragraph_ids() {
            if let Some(prev) = owner.insert(pid, s.name) {
                bail!(Data, "paragraph {pid} is in both {prev} and {}", s.name);
            }
        }
        if s.name != SplitName::TestUnseen {
            if let Some(r) = s.records.iter().find(|r| unseen.contains(r.requirement_id.as_str())) {
                bail!(Data, "unseen requirement {} leaked into {}", r.requirement_id, s.name);
            }
        } else if let Some(r) = s.records.iter().find(|r| !unseen.contains(r.requirement_id.as_str())) {
            bail!(Data, "seen requirement {} is in test_unseen", r.requirement_id);
        }
    }
    let train: BTreeSet<&str> = splits.iter().filter(|s| s.name == SplitName::Train).flat_map(|s| s.requirement_ids()).collect();
    for s in splits.iter().filter(|s| s.name == SplitName::TestSeen) {
        if let Some(r) = s.requirement_ids().into_iter().find(|r| !train.contains(r)) {
            bail!(Data, "test_seen requirement {r} never appears in train");
        }
    }
    Ok(())
}
