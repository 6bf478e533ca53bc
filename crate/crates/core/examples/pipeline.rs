//! Runs the staged curriculum (MLM, then TSDAE, then supervised
//! contrastive) on a small synthetic corpus with a small encoder and
//! prints each stage's loss and validation curve.
//!
//! `cargo run --release --example pipeline`

use auditmatch::corpus::{generate_synthetic, holdout_requirements, SynthConfig};
use auditmatch::encoder::{Checkpoint, EncoderConfig};
use auditmatch::evalkit::{evaluate_checkpoint, make_splits, SplitName};
use auditmatch::textprep::train_vocab;
use auditmatch::training::{run_pipeline, StageConfig, StageData, StageKind};

fn main() {
    let cfg = SynthConfig { n_requirements: 20, paragraphs_per_requirement: 15, vocab_themes: 20, unlabeled_per_theme: 30, ..Default::default() };
    let corpus = generate_synthetic(&cfg).unwrap().corpus;
    let unseen = holdout_requirements(&corpus, 4, 0).unwrap();
    let splits = make_splits(&corpus, &unseen, [0.7, 0.1, 0.2], 0).unwrap();
    let data = StageData::new(&corpus, &splits);
    let vocab = train_vocab(data.unlabeled_texts(), 800, 2).unwrap();
    let encoder = EncoderConfig { hidden_dim: 32, ff_dim: 64, ..EncoderConfig::desk(vocab.len()) };
    let init = Checkpoint::init(encoder, vocab, 0).unwrap();

    let plan: Vec<StageConfig> = [(StageKind::Mlm, 400), (StageKind::Tsdae, 400), (StageKind::Supervised, 300)]
        .into_iter()
        .map(|(kind, steps)| {
            let mut s = StageConfig::new(kind).with_seed(0);
            s.max_steps = steps;
            s.eval_every = 50;
            s
        })
        .collect();
    let (trained, reports) = run_pipeline(&plan, data, &init, None).unwrap();
    for r in &reports {
        let l = r.losses();
        let curve: Vec<String> = r.validation_curve().iter().map(|(s, v)| format!("{s}:{v:.3}")).collect();
        println!(
            "{:<10} loss {:.3} -> {:.3}, kept step {}, {:.1}s, validation {}",
            r.kind.to_string(),
            l[0].1,
            l[l.len() - 1].1,
            r.selected_step,
            r.wall_clock_secs,
            curve.join(" ")
        );
    }
    for (name, ck) in [("untrained", &init), ("trained", &trained)] {
        let rep = evaluate_checkpoint(ck, &corpus, &splits, 5).unwrap();
        println!(
            "{name:<9} recall@5 test_seen {:.3} test_unseen {:.3}",
            rep.recall(SplitName::TestSeen).unwrap(),
            rep.recall(SplitName::TestUnseen).unwrap()
        );
    }
    println!("provenance: {}", trained.provenance_label());
}
