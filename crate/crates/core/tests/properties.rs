//! Property tests: cosine, ranking, recall and the contrastive objective
//! against hand-written oracles and invariants.

mod common;

use std::collections::{HashMap, HashSet};

use auditmatch::encoder::{cosine_similarity, ParamLayout, SentenceEmbedding};
use auditmatch::evalkit::one_shot_recall;
use auditmatch::matcher::{top_k_embedding, EmbeddingIndex, Hit, IndexEntry, ItemKind, RankedList};
use auditmatch::numcore::{Graph, Tensor};
use auditmatch::training::losses::{contrastive_loss, similarity_matrix, supervised_loss};
use common::{brute_force_recall, exhaustive_rank, grad_config, spread_params};
use proptest::prelude::*;

fn vector(dim: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-1.0f32..1.0, dim).prop_filter("non-zero", |v| v.iter().any(|&x| x != 0.0))
}

fn emb(v: &[f32]) -> SentenceEmbedding {
    SentenceEmbedding::new(v.to_vec()).unwrap()
}

fn index_of(vectors: &[Vec<f32>]) -> EmbeddingIndex {
    let entries = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| IndexEntry {
            // Reverse-numbered so insertion order and id order disagree.
            item_id: format!("r{:02}", vectors.len() - i),
            kind: ItemKind::Requirement,
            embedding: emb(v),
            text_hash: String::new(),
        })
        .collect();
    EmbeddingIndex::from_entries(entries, "prop", vectors[0].len()).unwrap()
}

fn ids(list: &RankedList) -> Vec<String> {
    list.hits.iter().map(|h| h.item_id.clone()).collect()
}

/// Row-major `[n, d]` f64 tensor.
fn rows(data: &[Vec<f64>]) -> Tensor<f64> {
    Tensor::new(vec![data.len(), data[0].len()], data.concat()).unwrap()
}

fn cos64(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (n(a) * n(b))
}

/// InfoNCE written out directly: mean of the row and column
/// cross-entropies of the cosine matrix over temperature.
fn infonce_oracle(left: &[Vec<f64>], right: &[Vec<f64>], tau: f64) -> f64 {
    let n = left.len();
    let s: Vec<Vec<f64>> = left.iter().map(|l| right.iter().map(|r| cos64(l, r) / tau).collect()).collect();
    let ce = |logits: Vec<f64>, target: usize| {
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        lse - logits[target]
    };
    let row: f64 = (0..n).map(|i| ce(s[i].clone(), i)).sum::<f64>() / n as f64;
    let col: f64 = (0..n).map(|j| ce((0..n).map(|i| s[i][j]).collect(), j)).sum::<f64>() / n as f64;
    0.5 * (row + col)
}

fn matrix(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), n)
        .prop_filter("non-zero rows", |m| m.iter().all(|r| r.iter().any(|&x| x.abs() > 1e-3)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cosine_is_symmetric_bounded_and_scale_free(u in vector(16), v in vector(16), p in -3i32..4) {
        let (a, b) = (emb(&u), emb(&v));
        let ab = cosine_similarity(&a, &b).unwrap();
        prop_assert_eq!(ab.to_bits(), cosine_similarity(&b, &a).unwrap().to_bits());
        prop_assert!((-1.0..=1.0).contains(&ab));
        // Power-of-two scaling is exact in floating point, so the score is too.
        let s = 2f32.powi(p);
        let scaled = emb(&u.iter().map(|x| x * s).collect::<Vec<_>>());
        prop_assert_eq!(cosine_similarity(&scaled, &b).unwrap().to_bits(), ab.to_bits());
        prop_assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn top_k_matches_the_exhaustive_sort(vs in prop::collection::vec(vector(8), 1..30), q in vector(8), k in 1usize..35) {
        let index = index_of(&vs);
        let got = top_k_embedding("q", &emb(&q), &index, ItemKind::Requirement, k).unwrap();
        let scores: Vec<(String, f32)> = index
            .entries()
            .iter()
            .map(|e| (e.item_id.clone(), cosine_similarity(&emb(&q), &e.embedding).unwrap()))
            .collect();
        prop_assert_eq!(ids(&got), exhaustive_rank(&scores, k));
        prop_assert_eq!(got.hits.len(), k.min(vs.len()));
    }

    #[test]
    fn ranking_ignores_query_scale_and_nests_in_k(vs in prop::collection::vec(vector(8), 2..30), q in vector(8), p in -3i32..4, k in 1usize..29) {
        let index = index_of(&vs);
        let base = top_k_embedding("q", &emb(&q), &index, ItemKind::Requirement, k).unwrap();
        let s = 2f32.powi(p);
        let scaled = emb(&q.iter().map(|x| x * s).collect::<Vec<_>>());
        prop_assert_eq!(&base, &top_k_embedding("q", &scaled, &index, ItemKind::Requirement, k).unwrap());
        let wider = top_k_embedding("q", &emb(&q), &index, ItemKind::Requirement, k + 1).unwrap();
        prop_assert_eq!(&ids(&wider)[..base.hits.len()], &ids(&base)[..]);
    }

    #[test]
    fn recall_is_monotone_in_k_and_matches_the_recount(
        lists in prop::collection::vec((prop::collection::vec(0usize..10, 0..10), prop::collection::hash_set(0usize..10, 1..3)), 1..20),
    ) {
        let mut preds = Vec::new();
        let mut gold: HashMap<String, HashSet<String>> = HashMap::new();
        for (i, (hits, g)) in lists.iter().enumerate() {
            let mut seen = HashSet::new();
            let hits: Vec<Hit> = hits
                .iter()
                .filter(|h| seen.insert(**h))
                .map(|h| Hit { item_id: format!("R{h}"), score: 0.0 })
                .collect();
            preds.push(RankedList { query_id: format!("P{i}"), hits, k_requested: 10 });
            gold.insert(format!("P{i}"), g.iter().map(|r| format!("R{r}")).collect());
        }
        let mut last = 0.0;
        for k in 1..=10 {
            let r = one_shot_recall(&preds, &gold, k).unwrap();
            prop_assert_eq!(r, brute_force_recall(&preds, &gold, k));
            prop_assert!(r >= last);
            last = r;
        }
    }

    #[test]
    fn similarity_matrix_is_cosine_over_temperature(left in matrix(5, 6), right in matrix(5, 6), tau in 0.01f64..1.0) {
        let mut g = Graph::<f64>::new();
        let (l, r) = (g.constant(rows(&left)), g.constant(rows(&right)));
        let s = similarity_matrix(&mut g, l, r, tau).unwrap();
        let got = g.value(s).data().to_vec();
        for i in 0..5 {
            for j in 0..5 {
                let want = cos64(&left[i], &right[j]) / tau;
                prop_assert!((got[i * 5 + j] - want).abs() <= 1e-9 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn contrastive_loss_matches_the_written_out_objective(n in 2usize..9, seed in 0u64..1000) {
        let m = common::uniform(&mut common::rng(seed), &[2 * n, 6]);
        let all: Vec<Vec<f64>> = m.data().chunks(6).map(<[f64]>::to_vec).collect();
        let (left, right) = all.split_at(n);
        let mut g = Graph::<f64>::new();
        let (l, r) = (g.constant(rows(left)), g.constant(rows(right)));
        let loss = contrastive_loss(&mut g, l, r, 0.05).unwrap();
        let want = infonce_oracle(left, right, 0.05);
        prop_assert!((g.value(loss).item() - want).abs() <= 1e-9 * want.max(1.0));
    }

    #[test]
    fn supervised_loss_ignores_pair_order(seed in 0u64..500, shift in 1usize..4) {
        let cfg = grad_config();
        let params = spread_params(&ParamLayout::encoder(&cfg), seed);
        let mut r = common::rng(seed);
        let mut seq = |len: usize| -> Vec<u32> {
            use rand::Rng;
            let mut ids = vec![2];
            ids.extend((0..len).map(|_| r.gen_range(5..cfg.vocab_size as u32)));
            ids.push(3);
            ids
        };
        let pairs: Vec<(Vec<u32>, Vec<u32>)> = (0..4).map(|i| (seq(3 + i), seq(2 + i % 2))).collect();
        let loss = |pairs: &[(Vec<u32>, Vec<u32>)]| {
            let mut g = Graph::<f64>::new();
            let vars: Vec<_> = params.iter().map(|t| g.constant(t.clone())).collect();
            let l = supervised_loss(&mut g, &vars, &cfg, pairs, 0.05, None).unwrap();
            g.value(l).item()
        };
        let mut rotated = pairs.clone();
        rotated.rotate_left(shift);
        let (a, b) = (loss(&pairs), loss(&rotated));
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{} vs {}", a, b);
    }
}
