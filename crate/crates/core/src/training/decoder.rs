//! Denoising decoder: a causal transformer whose cross-attention sees only
//! the pooled sentence embedding. It has its own parameters and is dropped
//! when the denoising stage ends.

use crate::encoder::blocks::{attention, causal_mask, feed_forward, AttnVars, LN_EPS};
use crate::encoder::{EncoderConfig, ParamLayout};
use crate::error::{bail, Result};
use crate::numcore::{Graph, Real, Var};

const LAYER_TENSORS: usize = 26;

pub fn decoder_layout(cfg: &EncoderConfig) -> ParamLayout {
    let (d, f, v) = (cfg.hidden_dim, cfg.ff_dim, cfg.vocab_size);
    let mut lay = ParamLayout::default();
    lay.push("decoder.token_embedding", &[v, d]);
    lay.push("decoder.position_embedding", &[cfg.max_len, d]);
    for l in 0..cfg.num_layers {
        let p = format!("decoder.layer{l}");
        for block in ["self", "cross"] {
            lay.push(format!("{p}.{block}_norm.gain"), &[d]);
            lay.push(format!("{p}.{block}_norm.bias"), &[d]);
            for proj in ["query", "key", "value", "output"] {
                lay.push(format!("{p}.{block}_attn.{proj}.weight"), &[d, d]);
                lay.push(format!("{p}.{block}_attn.{proj}.bias"), &[d]);
            }
        }
        lay.push(format!("{p}.ff_norm.gain"), &[d]);
        lay.push(format!("{p}.ff_norm.bias"), &[d]);
        lay.push(format!("{p}.ff.in.weight"), &[d, f]);
        lay.push(format!("{p}.ff.in.bias"), &[f]);
        lay.push(format!("{p}.ff.out.weight"), &[f, d]);
        lay.push(format!("{p}.ff.out.bias"), &[d]);
    }
    lay.push("decoder.output.bias", &[v]);
    lay
}

/// Next-token logits `[len, vocab]` for `inputs`, conditioned on `memory`
/// (`[1, hidden]`). Output projection is tied to the decoder's token
/// embedding.
pub fn decoder_logits<T: Real>(g: &mut Graph<T>, dec: &[Var], cfg: &EncoderConfig, memory: Var, inputs: &[u32]) -> Result<Var> {
    let n = inputs.len();
    if n == 0 || n > cfg.max_len {
        bail!(Shape, "decoder input of {n} tokens for max_len {}", cfg.max_len);
    }
    let ids: Vec<usize> = inputs.iter().map(|&i| i as usize).collect();
    let positions: Vec<usize> = (0..n).collect();
    let tok = g.gather_rows(dec[0], &ids)?;
    let pos = g.gather_rows(dec[1], &positions)?;
    let mut x = g.add(tok, pos)?;
    let causal = causal_mask(n);
    let to_memory = vec![true; n];
    for l in 0..cfg.num_layers {
        let w = &dec[2 + l * LAYER_TENSORS..];
        let h = g.layer_norm(x, w[0], w[1], LN_EPS)?;
        let a = attention(g, h, h, &AttnVars::from_slice(&w[2..10]), cfg.num_heads, &causal)?;
        x = g.add(x, a)?;
        let h = g.layer_norm(x, w[10], w[11], LN_EPS)?;
        let c = attention(g, h, memory, &AttnVars::from_slice(&w[12..20]), cfg.num_heads, &to_memory)?;
        x = g.add(x, c)?;
        let h = g.layer_norm(x, w[20], w[21], LN_EPS)?;
        let f = feed_forward(g, h, (w[22], w[23]), (w[24], w[25]))?;
        x = g.add(x, f)?;
    }
    let logits = g.matmul_t(x, dec[0])?;
    g.add_row(logits, dec[dec.len() - 1])
}
