//! Batch losses of the four stages, generic over the scalar type so the
//! same code runs in f32 for training and in f64 for gradient checks.

use super::decoder::decoder_logits;
use crate::encoder::{embed_sequence, encode_states, DropoutPlan, EncoderConfig};
use crate::error::{bail, Result};
use crate::numcore::{Graph, Real, Var};
use crate::textprep::MlmTarget;
use crate::util::mix_seed;

/// A masked sequence (no padding) and its prediction targets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskedExample {
    pub ids: Vec<u32>,
    pub targets: Vec<MlmTarget>,
}

/// Noised encoder input and the clean sequence the decoder reconstructs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenoisingExample {
    pub noisy: Vec<u32>,
    pub clean: Vec<u32>,
}

/// Dropout plan for sequence `salt` of a batch.
fn plan_for(dropout: Option<DropoutPlan>, salt: u64) -> Option<DropoutPlan> {
    dropout.map(|d| DropoutPlan { prob: d.prob, seed: mix_seed(d.seed, salt) })
}

/// `S[i][j] = cos(left_i, right_j) / temperature` for `[N,d]` inputs.
pub fn similarity_matrix<T: Real>(g: &mut Graph<T>, left: Var, right: Var, temperature: f64) -> Result<Var> {
    let ln = g.normalize_rows(left)?;
    let rn = g.normalize_rows(right)?;
    let s = g.matmul_t(ln, rn)?;
    Ok(g.scale(s, 1.0 / temperature))
}

/// Symmetric in-batch InfoNCE: row i of `left` should pick row i of
/// `right` and vice versa. Mean of the row-wise and column-wise
/// cross-entropies.
pub fn contrastive_loss<T: Real>(g: &mut Graph<T>, left: Var, right: Var, temperature: f64) -> Result<Var> {
    let n = g.value(left).rows();
    if n < 2 || g.value(right).rows() != n {
        bail!(Usage, "contrastive loss needs two batches of the same size >= 2");
    }
    let s = similarity_matrix(g, left, right, temperature)?;
    let targets: Vec<usize> = (0..n).collect();
    let rows = g.cross_entropy(s, &targets)?;
    let st = g.transpose(s);
    let cols = g.cross_entropy(st, &targets)?;
    let both = g.add(rows, cols)?;
    Ok(g.scale(both, 0.5))
}

/// Masked-token cross-entropy, averaged over every target in the batch.
/// Logits are the final states at masked positions times the token
/// embedding matrix, plus `head_bias`. `None` when the batch has no target.
pub fn mlm_loss<T: Real>(
    g: &mut Graph<T>,
    enc: &[Var],
    head_bias: Var,
    cfg: &EncoderConfig,
    batch: &[MaskedExample],
    dropout: Option<DropoutPlan>,
) -> Result<Option<Var>> {
    let mut picked = Vec::new();
    let mut originals = Vec::new();
    for (i, ex) in batch.iter().enumerate() {
        if ex.targets.is_empty() {
            continue;
        }
        let keep = vec![true; ex.ids.len()];
        let states = encode_states(g, enc, cfg, &ex.ids, &keep, plan_for(dropout, i as u64))?;
        let positions: Vec<usize> = ex.targets.iter().map(|t| t.position).collect();
        picked.push(g.gather_rows(states, &positions)?);
        originals.extend(ex.targets.iter().map(|t| t.original as usize));
    }
    if picked.is_empty() {
        return Ok(None);
    }
    let h = g.concat_rows(&picked)?;
    let logits = g.matmul_t(h, enc[0])?;
    let logits = g.add_row(logits, head_bias)?;
    Ok(Some(g.cross_entropy(logits, &originals)?))
}

/// Two dropout views of each text; view pairs are the positives.
pub fn simcse_loss<T: Real>(
    g: &mut Graph<T>,
    enc: &[Var],
    cfg: &EncoderConfig,
    batch: &[Vec<u32>],
    temperature: f64,
    dropout: Option<DropoutPlan>,
) -> Result<Var> {
    let mut a = Vec::with_capacity(batch.len());
    let mut b = Vec::with_capacity(batch.len());
    for (i, ids) in batch.iter().enumerate() {
        a.push(embed_sequence(g, enc, cfg, ids, plan_for(dropout, 2 * i as u64))?);
        b.push(embed_sequence(g, enc, cfg, ids, plan_for(dropout, 2 * i as u64 + 1))?);
    }
    let (a, b) = (g.concat_rows(&a)?, g.concat_rows(&b)?);
    contrastive_loss(g, a, b, temperature)
}

/// Paragraph rows against requirement columns only; no same-side terms.
pub fn supervised_loss<T: Real>(
    g: &mut Graph<T>,
    enc: &[Var],
    cfg: &EncoderConfig,
    pairs: &[(Vec<u32>, Vec<u32>)],
    temperature: f64,
    dropout: Option<DropoutPlan>,
) -> Result<Var> {
    let mut p = Vec::with_capacity(pairs.len());
    let mut r = Vec::with_capacity(pairs.len());
    for (i, (para, req)) in pairs.iter().enumerate() {
        p.push(embed_sequence(g, enc, cfg, para, plan_for(dropout, 2 * i as u64))?);
        r.push(embed_sequence(g, enc, cfg, req, plan_for(dropout, 2 * i as u64 + 1))?);
    }
    let (p, r) = (g.concat_rows(&p)?, g.concat_rows(&r)?);
    contrastive_loss(g, p, r, temperature)
}

/// Teacher-forced reconstruction cross-entropy over every clean token after
/// the first, decoding from the pooled embedding of the noisy input.
pub fn tsdae_loss<T: Real>(
    g: &mut Graph<T>,
    enc: &[Var],
    dec: &[Var],
    cfg: &EncoderConfig,
    batch: &[DenoisingExample],
    dropout: Option<DropoutPlan>,
) -> Result<Var> {
    let mut logits = Vec::with_capacity(batch.len());
    let mut targets = Vec::new();
    for (i, ex) in batch.iter().enumerate() {
        if ex.clean.len() < 2 {
            bail!(Data, "denoising target needs at least two tokens");
        }
        let pooled = embed_sequence(g, enc, cfg, &ex.noisy, plan_for(dropout, i as u64))?;
        let n = ex.clean.len() - 1;
        logits.push(decoder_logits(g, dec, cfg, pooled, &ex.clean[..n])?);
        targets.extend(ex.clean[1..].iter().map(|&t| t as usize));
    }
    if logits.is_empty() {
        bail!(Data, "empty denoising batch");
    }
    let all = g.concat_rows(&logits)?;
    g.cross_entropy(all, &targets)
}
