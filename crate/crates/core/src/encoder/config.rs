use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::textprep::HARD_MAX_LEN;

/// Encoder hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub ff_dim: usize,
    pub max_len: usize,
    pub dropout_prob: f64,
}

impl EncoderConfig {
    /// The desk-scale default: 2 layers, hidden 64, 4 heads, ff 256, 128 tokens.
    pub fn desk(vocab_size: usize) -> Self {
        EncoderConfig {
            vocab_size,
            hidden_dim: 64,
            num_layers: 2,
            num_heads: 4,
            ff_dim: 256,
            max_len: 128,
            dropout_prob: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.vocab_size, self.hidden_dim, self.num_layers, self.num_heads, self.ff_dim, self.max_len];
        if dims.contains(&0) {
            bail!(Config, "encoder dimensions must be positive: {self:?}");
        }
        if self.hidden_dim % self.num_heads != 0 {
            bail!(Config, "hidden_dim {} not divisible by num_heads {}", self.hidden_dim, self.num_heads);
        }
        if self.max_len > HARD_MAX_LEN {
            bail!(Config, "max_len {} exceeds {HARD_MAX_LEN}", self.max_len);
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            bail!(Config, "dropout_prob {} outside [0,1)", self.dropout_prob);
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.num_heads
    }
}
