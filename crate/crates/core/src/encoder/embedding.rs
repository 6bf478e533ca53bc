use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

/// Fixed-length sentence vector. Stored un-normalized; cosine normalizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceEmbedding(Vec<f32>);

impl SentenceEmbedding {
    /// Wraps a vector, rejecting non-finite and all-zero input.
    pub fn new(v: Vec<f32>) -> Result<Self> {
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            bail!(Data, "embedding must be non-empty and finite");
        }
        if v.iter().all(|&x| x == 0.0) {
            bail!(Usage, "embedding is the zero vector");
        }
        Ok(SentenceEmbedding(v))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.0
    }
}

/// `u·v / (‖u‖‖v‖)`, accumulated in f64 and clamped to [−1, 1].
pub fn cosine_similarity(u: &SentenceEmbedding, v: &SentenceEmbedding) -> Result<f32> {
    cosine_slices(u.as_slice(), v.as_slice())
}

pub(crate) fn cosine_slices(u: &[f32], v: &[f32]) -> Result<f32> {
    if u.len() != v.len() {
        bail!(Shape, "cosine of vectors with {} and {} dims", u.len(), v.len());
    }
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        bail!(Usage, "cosine similarity with a zero vector");
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0) as f32)
}
