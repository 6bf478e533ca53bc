use std::collections::BTreeMap;

use super::records::Corpus;
use crate::error::{bail, Result};

fn counts(text: &str) -> BTreeMap<&str, f64> {
    let mut m = BTreeMap::new();
    for w in text.split_whitespace() {
        *m.entry(w).or_insert(0.0) += 1.0;
    }
    m
}

fn cosine(a: &BTreeMap<&str, f64>, b: &BTreeMap<&str, f64>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(w, x)| b.get(w).map(|y| x * y)).sum();
    let na: f64 = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// One-shot recall@k of whitespace bag-of-words count cosine, ranking every
/// annotated paragraph against all requirement descriptions. Ties go to the
/// smaller id.
pub fn bag_of_words_recall(corpus: &Corpus, k: usize) -> Result<f64> {
    if k == 0 {
        bail!(Usage, "k must be at least 1");
    }
    let gold = corpus.gold();
    if gold.is_empty() {
        bail!(Usage, "corpus has no annotated paragraphs");
    }
    let reqs: Vec<(&str, BTreeMap<&str, f64>)> =
        corpus.requirements.iter().map(|r| (r.id.as_str(), counts(&r.description))).collect();
    let mut hits = 0usize;
    for p in &corpus.paragraphs {
        let Some(g) = gold.get(&p.id) else { continue };
        let q = counts(&p.text);
        let mut scored: Vec<(f64, &str)> = reqs.iter().map(|(id, v)| (cosine(&q, v), *id)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
        if scored.iter().take(k).any(|(_, id)| g.contains(*id)) {
            hits += 1;
        }
    }
    Ok(hits as f64 / gold.len() as f64)
}
