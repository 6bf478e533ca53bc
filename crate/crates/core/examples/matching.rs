//! Builds an embedding index over requirements and paragraphs, ranks in
//! both directions, and round-trips the index through disk. The encoder is
//! untrained here, so the ranking reflects token overlap only.
//!
//! `cargo run --release --example matching`

use auditmatch::corpus::{generate_synthetic, SynthConfig};
use auditmatch::encoder::{Checkpoint, EncoderConfig};
use auditmatch::matcher::{build_index, load_index, recommend_paragraphs, recommend_requirements, save_index, IndexItem, ItemKind};
use auditmatch::textprep::train_vocab;

fn main() {
    let cfg = SynthConfig { n_requirements: 10, paragraphs_per_requirement: 5, vocab_themes: 10, unlabeled_per_theme: 2, ..Default::default() };
    let corpus = generate_synthetic(&cfg).unwrap().corpus;
    let texts = corpus.paragraphs.iter().map(|p| p.text.as_str()).chain(corpus.requirements.iter().map(|r| r.description.as_str()));
    let vocab = train_vocab(texts, 600, 1).unwrap();
    let ck = Checkpoint::init(EncoderConfig::desk(vocab.len()), vocab, 1).unwrap();

    let items: Vec<IndexItem> = corpus
        .requirements
        .iter()
        .map(|r| IndexItem::new(r.id.clone(), ItemKind::Requirement, r.description.clone()))
        .chain(corpus.paragraphs.iter().map(|p| IndexItem::new(p.id.clone(), ItemKind::Paragraph, p.text.clone())))
        .collect();
    let index = build_index(&items, &ck).unwrap();
    println!("{} requirements, {} paragraphs indexed", index.count(ItemKind::Requirement), index.count(ItemKind::Paragraph));

    let first = &corpus.annotations[0];
    let paragraph = corpus.paragraph(&first.paragraph_id).unwrap();
    let gold: Vec<&str> = corpus.annotations.iter().filter(|a| a.paragraph_id == paragraph.id).map(|a| a.requirement_id.as_str()).collect();
    println!("paragraph {} (gold {gold:?})", paragraph.id);
    for h in recommend_requirements(&paragraph.text, &index, &ck, 5).unwrap().hits {
        println!("  {:.6}  {}", h.score, h.item_id);
    }
    let req = &corpus.requirements[0];
    println!("requirement {}", req.id);
    for h in recommend_paragraphs(&req.description, &index, &ck, 3).unwrap().hits {
        println!("  {:.6}  {}", h.score, h.item_id);
    }

    let dir = tempfile::tempdir().unwrap();
    save_index(&index, dir.path()).unwrap();
    assert_eq!(load_index(dir.path()).unwrap(), index);
    println!("index round-trips through {}", dir.path().display());
}
