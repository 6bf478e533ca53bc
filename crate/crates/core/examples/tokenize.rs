//! Trains a subword vocabulary on a few sentences and shows how text is
//! split, encoded and decoded.
//!
//! `cargo run --example tokenize`

use auditmatch::textprep::{decode, encode, train_vocab};

fn main() {
    let texts = [
        "The auditor confirms that the risk management system is documented.",
        "Risk management documentation is reviewed annually by the auditor.",
        "Der Prüfer bestätigt die Dokumentation des Risikomanagements.",
        "Annual review of the management documentation is confirmed.",
    ];
    let vocab = train_vocab(texts.iter().copied(), 120, 1).unwrap();
    println!("{} tokens, first learned: {:?}", vocab.len(), &vocab.tokens()[5..15.min(vocab.len())]);

    let text = "The reviewer documents unmanaged risks.";
    let seq = encode(text, &vocab, 32).unwrap();
    let pieces: Vec<&str> = seq.ids[..seq.real_len()].iter().map(|&id| vocab.token(id).unwrap()).collect();
    println!("{text:?} -> {pieces:?}");
    println!("decoded: {:?}", decode(&seq, &vocab).unwrap());
}
