//! Transformer building blocks shared by the encoder and the denoising decoder.

use crate::error::Result;
use crate::numcore::{Graph, Real, Var};
use crate::util::mix_seed;

pub(crate) const LN_EPS: f64 = 1e-5;

/// Projection parameters of one attention block, in layout order:
/// query, key, value, output (weight then bias each).
#[derive(Clone, Copy, Debug)]
pub(crate) struct AttnVars {
    pub q: (Var, Var),
    pub k: (Var, Var),
    pub v: (Var, Var),
    pub o: (Var, Var),
}

impl AttnVars {
    pub fn from_slice(v: &[Var]) -> Self {
        AttnVars { q: (v[0], v[1]), k: (v[2], v[3]), v: (v[4], v[5]), o: (v[6], v[7]) }
    }
}

pub(crate) fn linear<T: Real>(g: &mut Graph<T>, x: Var, (w, b): (Var, Var)) -> Result<Var> {
    let y = g.matmul(x, w)?;
    g.add_row(y, b)
}

/// Multi-head attention of `queries[Lq,d]` over `memory[Lk,d]`. `keep` is an
/// `Lq × Lk` mask of attendable positions.
pub(crate) fn attention<T: Real>(
    g: &mut Graph<T>,
    queries: Var,
    memory: Var,
    w: &AttnVars,
    heads: usize,
    keep: &[bool],
) -> Result<Var> {
    let d = g.value(queries).cols();
    let dh = d / heads;
    let q = linear(g, queries, w.q)?;
    let k = linear(g, memory, w.k)?;
    let v = linear(g, memory, w.v)?;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.slice_cols(q, h * dh, dh)?;
        let kh = g.slice_cols(k, h * dh, dh)?;
        let vh = g.slice_cols(v, h * dh, dh)?;
        let scores = g.matmul_t(qh, kh)?;
        let scores = g.scale(scores, scale);
        let probs = g.masked_softmax_rows(scores, keep)?;
        outs.push(g.matmul(probs, vh)?);
    }
    let joined = if heads == 1 { outs[0] } else { g.concat_cols(&outs)? };
    linear(g, joined, w.o)
}

pub(crate) fn feed_forward<T: Real>(g: &mut Graph<T>, x: Var, inner: (Var, Var), outer: (Var, Var)) -> Result<Var> {
    let h = linear(g, x, inner)?;
    let h = g.gelu(h);
    linear(g, h, outer)
}

/// Dropout whose mask is keyed by `(seed, site)`; a no-op when `p == 0`.
pub(crate) fn maybe_dropout<T: Real>(g: &mut Graph<T>, x: Var, p: f64, seed: Option<u64>, site: u64) -> Result<Var> {
    match seed {
        Some(s) if p > 0.0 => g.dropout(x, p, mix_seed(s, site)),
        _ => Ok(x),
    }
}

/// `Lq × Lk` mask allowing every query to see every kept key.
pub(crate) fn key_mask(queries: usize, keys: &[bool]) -> Vec<bool> {
    let mut m = Vec::with_capacity(queries * keys.len());
    for _ in 0..queries {
        m.extend_from_slice(keys);
    }
    m
}

/// Lower-triangular mask: position i sees positions 0..=i.
pub(crate) fn causal_mask(len: usize) -> Vec<bool> {
    (0..len * len).map(|idx| idx % len <= idx / len).collect()
}
