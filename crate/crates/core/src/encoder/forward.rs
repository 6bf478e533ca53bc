use super::blocks::{attention, feed_forward, key_mask, maybe_dropout, AttnVars, LN_EPS};
use super::config::EncoderConfig;
use super::embedding::SentenceEmbedding;
use super::weights::{EncoderWeights, ParamLayout};
use crate::error::{bail, Result};
use crate::numcore::{Graph, Real, Tensor, Var};
use crate::textprep::TokenSequence;

/// Training-mode dropout: probability and the seed every mask derives from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropoutPlan {
    pub prob: f64,
    pub seed: u64,
}

/// Copies encoder weights into `g` as leaves, in layout order.
pub fn bind_encoder<T: Real>(g: &mut Graph<T>, weights: &EncoderWeights<T>, trainable: bool) -> Vec<Var> {
    weights.params.iter().map(|p| g.leaf(p.clone(), trainable)).collect()
}

/// Runs the transformer stack over `ids`, returning token states `[len, hidden]`.
///
/// Layout per layer (pre-norm): `x += attn(LN(x))`, then `x += ff(LN(x))`;
/// one more LN over the output of the last layer.
/// `keep` marks real (non-PAD) positions; attention never looks at the rest.
pub fn encode_states<T: Real>(
    g: &mut Graph<T>,
    vars: &[Var],
    cfg: &EncoderConfig,
    ids: &[u32],
    keep: &[bool],
    dropout: Option<DropoutPlan>,
) -> Result<Var> {
    let len = ids.len();
    if len == 0 || len > cfg.max_len {
        bail!(Shape, "sequence of {len} tokens for max_len {}", cfg.max_len);
    }
    if keep.len() != len {
        bail!(Shape, "mask of {} for {len} tokens", keep.len());
    }
    if let Some(&bad) = ids.iter().find(|&&i| i as usize >= cfg.vocab_size) {
        bail!(Data, "token id {bad} out of range for vocab_size {}", cfg.vocab_size);
    }
    let (p, seed) = dropout.map_or((0.0, None), |d| (d.prob, Some(d.seed)));
    let token_ids: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
    let positions: Vec<usize> = (0..len).collect();
    let tok = g.gather_rows(vars[0], &token_ids)?;
    let pos = g.gather_rows(vars[1], &positions)?;
    let mut x = g.add(tok, pos)?;
    x = maybe_dropout(g, x, p, seed, 0)?;
    let mask = key_mask(len, keep);
    for l in 0..cfg.num_layers {
        let w = &vars[ParamLayout::encoder_layer_base(l)..];
        let h = g.layer_norm(x, w[0], w[1], LN_EPS)?;
        let a = attention(g, h, h, &AttnVars::from_slice(&w[2..10]), cfg.num_heads, &mask)?;
        let a = maybe_dropout(g, a, p, seed, 1 + 2 * l as u64)?;
        x = g.add(x, a)?;
        let h = g.layer_norm(x, w[10], w[11], LN_EPS)?;
        let f = feed_forward(g, h, (w[12], w[13]), (w[14], w[15]))?;
        let f = maybe_dropout(g, f, p, seed, 2 + 2 * l as u64)?;
        x = g.add(x, f)?;
    }
    let w = &vars[ParamLayout::encoder_layer_base(cfg.num_layers)..];
    g.layer_norm(x, w[0], w[1], LN_EPS)
}

/// Pooled `[1, hidden]` embedding of an unpadded token sequence.
pub fn embed_sequence<T: Real>(
    g: &mut Graph<T>,
    vars: &[Var],
    cfg: &EncoderConfig,
    ids: &[u32],
    dropout: Option<DropoutPlan>,
) -> Result<Var> {
    let keep = vec![true; ids.len()];
    let states = encode_states(g, vars, cfg, ids, &keep, dropout)?;
    g.masked_mean_rows(states, &keep)
}

/// Token states for a full padded sequence. Dropout is active only in
/// `train_mode`, with masks derived from `rng_seed`.
pub fn forward_tokens<T: Real>(
    seq: &TokenSequence,
    weights: &EncoderWeights<T>,
    train_mode: bool,
    rng_seed: u64,
) -> Result<Tensor<T>> {
    let cfg = &weights.config;
    if seq.ids.len() != seq.attention_mask.len() {
        bail!(Shape, "ids and attention mask lengths differ");
    }
    let mut g = Graph::new();
    let vars = bind_encoder(&mut g, weights, false);
    let keep: Vec<bool> = seq.attention_mask.iter().map(|&m| m == 1).collect();
    let dropout = train_mode.then_some(DropoutPlan { prob: cfg.dropout_prob, seed: rng_seed });
    let out = encode_states(&mut g, &vars, cfg, &seq.ids, &keep, dropout)?;
    Ok(g.value(out).clone())
}

/// Mean of token states over positions where the attention mask is 1.
pub fn mean_pool<T: Real>(states: &Tensor<T>, attention_mask: &[u8]) -> Result<SentenceEmbedding> {
    if attention_mask.len() != states.rows() {
        bail!(Shape, "mask of {} for {} token states", attention_mask.len(), states.rows());
    }
    let count = attention_mask.iter().filter(|&&m| m == 1).count();
    if count == 0 {
        bail!(Usage, "mean pooling over an all-zero attention mask");
    }
    let n = states.cols();
    let mut sum = vec![T::zero(); n];
    for (i, _) in attention_mask.iter().enumerate().filter(|(_, &m)| m == 1) {
        for (s, &v) in sum.iter_mut().zip(states.row(i)) {
            *s += v;
        }
    }
    let inv = T::one() / T::of(count as f64);
    SentenceEmbedding::new(sum.into_iter().map(|v| (v * inv).f64() as f32).collect())
}
