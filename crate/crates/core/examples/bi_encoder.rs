//! One encoder embeds both sides: paragraphs and requirement descriptions
//! go through the same weights, are mean-pooled, and compared by cosine.
//!
//! `cargo run --example bi_encoder`

use auditmatch::encoder::{cosine_similarity, Checkpoint, EncoderConfig};
use auditmatch::textprep::train_vocab;

fn main() {
    let paragraph = "Access rights to production systems are reviewed every quarter by the security officer.";
    let requirements = [
        "Periodic review of user access rights",
        "Backup copies are tested for restorability",
        "Suppliers are assessed before onboarding",
    ];
    let vocab = train_vocab(requirements.iter().copied().chain([paragraph]), 200, 1).unwrap();
    let ck = Checkpoint::init(EncoderConfig::desk(vocab.len()), vocab, 7).unwrap();
    println!("encoder {:?}, fingerprint {}", ck.config(), ck.fingerprint());

    let p = ck.embed(paragraph).unwrap();
    println!("paragraph embedding: {} dims, first four {:?}", p.dim(), &p.as_slice()[..4]);
    for r in requirements {
        let score = cosine_similarity(&p, &ck.embed(r).unwrap()).unwrap();
        println!("{score:+.4}  {r}");
    }
    // Untrained weights already give identical texts a cosine of one.
    println!("self-similarity {:.6}", cosine_similarity(&p, &ck.embed(paragraph).unwrap()).unwrap());
}
