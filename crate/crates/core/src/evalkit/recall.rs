use std::collections::{HashMap, HashSet};

use crate::error::{bail, Result};
use crate::matcher::RankedList;

/// Mean over queries of 1 if any gold id is among the first `k` hits.
pub fn one_shot_recall(predictions: &[RankedList], gold: &HashMap<String, HashSet<String>>, k: usize) -> Result<f64> {
    if predictions.is_empty() {
        bail!(Usage, "no predictions to score");
    }
    if k == 0 {
        bail!(Usage, "k must be at least 1");
    }
    let mut hits = 0usize;
    for p in predictions {
        let Some(g) = gold.get(&p.query_id) else {
            bail!(Usage, "prediction for {} has no gold entry", p.query_id);
        };
        if p.hits.iter().take(k).any(|h| g.contains(&h.item_id)) {
            hits += 1;
        }
    }
    Ok(hits as f64 / predictions.len() as f64)
}
