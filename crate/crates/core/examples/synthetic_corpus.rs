//! Generates the default synthetic corpus and prints its declared counts,
//! the bag-of-words reference recall and per-split statistics.
//!
//! `cargo run --release --example synthetic_corpus [seed] [out-dir]`

use std::path::PathBuf;

use auditmatch::corpus::{corpus_stats, generate_synthetic, holdout_requirements, save_corpus_dir, CorpusManifest, SplitPlan, SynthConfig};
use auditmatch::evalkit::make_splits;

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed is an integer"));
    let out: Option<PathBuf> = args.next().map(PathBuf::from);

    let synth = generate_synthetic(&SynthConfig { seed, ..Default::default() }).unwrap();
    let c = &synth.corpus;
    println!("{:#?}", synth.declared);
    println!("bag-of-words recall@5: {:.3}", synth.bow_recall_at_5);
    println!("first paragraph: {}", c.paragraphs[0].text);
    println!("first requirement: {} {}", c.requirements[0].id, c.requirements[0].description);

    let unseen = holdout_requirements(c, 8, seed).unwrap();
    let fractions = [0.7, 0.1, 0.2];
    let splits = make_splits(c, &unseen, fractions, seed).unwrap();
    print!("{}", corpus_stats(c, &splits).render_table());

    if let Some(dir) = out {
        let plan = SplitPlan { unseen, fractions, seed };
        save_corpus_dir(c, &dir, &CorpusManifest::standard(c.requirements.len(), Some(plan))).unwrap();
        println!("wrote {}", dir.display());
    }
}
