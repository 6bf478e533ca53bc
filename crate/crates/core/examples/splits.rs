//! Requirement hold-out and paragraph splits. Unseen requirements appear
//! only in test_unseen; every paragraph lands in at most one split.
//!
//! `cargo run --example splits`

use auditmatch::corpus::{generate_synthetic, holdout_requirements, SynthConfig};
use auditmatch::evalkit::{check_splits, make_splits};

fn main() {
    let cfg = SynthConfig { n_requirements: 12, paragraphs_per_requirement: 8, vocab_themes: 12, unlabeled_per_theme: 2, ..Default::default() };
    let corpus = generate_synthetic(&cfg).unwrap().corpus;
    for seed in 0..3 {
        let unseen = holdout_requirements(&corpus, 3, seed).unwrap();
        let splits = make_splits(&corpus, &unseen, [0.7, 0.1, 0.2], seed).unwrap();
        check_splits(&splits, &unseen).unwrap();
        let sizes: Vec<String> =
            splits.iter().map(|s| format!("{} {}/{}", s.name, s.paragraph_ids().len(), s.requirement_ids().len())).collect();
        println!("seed {seed}: unseen {unseen:?}; paragraphs/requirements {}", sizes.join(", "));
    }
}
