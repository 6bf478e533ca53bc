//! One-shot recall@k per split and language, for an untrained and a
//! briefly supervised checkpoint, rendered side by side.
//!
//! `cargo run --release --example evaluate`

use auditmatch::corpus::{generate_synthetic, holdout_requirements, SynthConfig};
use auditmatch::encoder::{Checkpoint, EncoderConfig};
use auditmatch::evalkit::{evaluate_checkpoint, make_splits, render_table};
use auditmatch::textprep::train_vocab;
use auditmatch::training::{run_stage, StageConfig, StageData, StageKind};

fn main() {
    let cfg = SynthConfig { n_requirements: 12, paragraphs_per_requirement: 10, vocab_themes: 12, unlabeled_per_theme: 2, ..Default::default() };
    let corpus = generate_synthetic(&cfg).unwrap().corpus;
    let unseen = holdout_requirements(&corpus, 2, 3).unwrap();
    let splits = make_splits(&corpus, &unseen, [0.7, 0.1, 0.2], 3).unwrap();
    let data = StageData::new(&corpus, &splits);
    let vocab = train_vocab(data.unlabeled_texts(), 800, 1).unwrap();
    let init = Checkpoint::init(EncoderConfig { hidden_dim: 32, ff_dim: 64, ..EncoderConfig::desk(vocab.len()) }, vocab, 3).unwrap();

    let mut stage = StageConfig::new(StageKind::Supervised).with_seed(3);
    stage.max_steps = 100;
    stage.batch_size = 8;
    let (trained, _) = run_stage(data, &init, &stage).unwrap();

    let reports = [evaluate_checkpoint(&init, &corpus, &splits, 5).unwrap(), evaluate_checkpoint(&trained, &corpus, &splits, 5).unwrap()];
    print!("{}", render_table(&reports));
    println!("{}", reports[1].to_json().unwrap());
}
