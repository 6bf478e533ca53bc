use rand::seq::index::sample;
use rand::Rng;

use super::vocab::{TokenSequence, MASK};
use crate::error::{bail, Result};
use crate::util::rng_for;

/// A masked-LM prediction target: position and the id that was there.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MlmTarget {
    pub position: usize,
    pub original: u32,
}

const FIRST_ORDINARY_ID: u32 = 5;

/// BERT-style masking. Each content position is selected with probability
/// `mask_prob`; selected positions become MASK (80%), a random ordinary
/// token (10%), or stay unchanged (10%).
pub fn apply_mlm_mask(
    seq: &TokenSequence,
    vocab_size: usize,
    mask_prob: f64,
    rng_seed: u64,
) -> Result<(TokenSequence, Vec<MlmTarget>)> {
    if !(0.0..1.0).contains(&mask_prob) {
        bail!(Usage, "mask_prob {mask_prob} outside [0,1)");
    }
    let mut rng = rng_for(rng_seed, &[0x4D4C4D]);
    let mut out = seq.clone();
    let mut targets = Vec::new();
    for pos in seq.content_positions() {
        if rng.gen::<f64>() >= mask_prob {
            continue;
        }
        targets.push(MlmTarget { position: pos, original: seq.ids[pos] });
        let roll = rng.gen::<f64>();
        if roll < 0.8 {
            out.ids[pos] = MASK;
        } else if roll < 0.9 && vocab_size as u32 > FIRST_ORDINARY_ID {
            out.ids[pos] = rng.gen_range(FIRST_ORDINARY_ID..vocab_size as u32);
        }
    }
    Ok((out, targets))
}

/// Replaces exactly `round(noise_ratio × content_length)` content positions,
/// drawn uniformly without replacement, by MASK.
pub fn apply_tsdae_noise(seq: &TokenSequence, noise_ratio: f64, rng_seed: u64) -> Result<TokenSequence> {
    if !(0.0..=1.0).contains(&noise_ratio) {
        bail!(Usage, "noise_ratio {noise_ratio} outside [0,1]");
    }
    let content: Vec<usize> = seq.content_positions().collect();
    let count = (noise_ratio * content.len() as f64).round() as usize;
    let mut rng = rng_for(rng_seed, &[0x75DAE]);
    let mut out = seq.clone();
    for i in sample(&mut rng, content.len(), count.min(content.len())) {
        out.ids[content[i]] = MASK;
    }
    Ok(out)
}
