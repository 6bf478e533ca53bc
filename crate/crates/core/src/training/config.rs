use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::evalkit::SplitName;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageKind {
    Mlm,
    Simcse,
    Tsdae,
    Supervised,
}

impl StageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StageKind::Mlm => "mlm",
            StageKind::Simcse => "simcse",
            StageKind::Tsdae => "tsdae",
            StageKind::Supervised => "supervised",
        }
    }

    pub fn is_contrastive(self) -> bool {
        matches!(self, StageKind::Simcse | StageKind::Supervised)
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StageKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlm" => Ok(StageKind::Mlm),
            "simcse" => Ok(StageKind::Simcse),
            "tsdae" => Ok(StageKind::Tsdae),
            "supervised" => Ok(StageKind::Supervised),
            _ => Err(Error::Usage(format!("unknown stage kind {s:?}; expected mlm, simcse, tsdae or supervised"))),
        }
    }
}

/// Settings of one training stage. Fields a stage does not use are ignored
/// (e.g. `temperature` for MLM).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub kind: StageKind,
    pub batch_size: usize,
    pub max_steps: u64,
    /// Validate every this many steps (and after the last one).
    pub eval_every: u64,
    /// Stop after this many validations without improvement.
    pub patience: Option<u64>,
    pub learning_rate: f64,
    pub temperature: f64,
    pub noise_ratio: f64,
    pub mask_prob: f64,
    /// Rescale the gradient when its global L2 norm exceeds this.
    pub grad_clip: Option<f64>,
    pub rng_seed: u64,
    pub validation: SplitName,
    pub k: usize,
}

impl StageConfig {
    /// Defaults for `kind`, sized for the desk-scale encoder on the default
    /// synthetic corpus (a few minutes per stage on one core).
    pub fn new(kind: StageKind) -> Self {
        let (max_steps, eval_every, learning_rate) = match kind {
            StageKind::Mlm => (1000, 250, 3e-3),
            StageKind::Tsdae => (1500, 100, 1e-3),
            StageKind::Simcse => (500, 50, 1e-3),
            StageKind::Supervised => (800, 50, 1e-3),
        };
        StageConfig {
            kind,
            batch_size: 16,
            max_steps,
            eval_every,
            patience: None,
            learning_rate,
            temperature: 0.05,
            noise_ratio: 0.6,
            mask_prob: 0.15,
            grad_clip: Some(1.0),
            rng_seed: 0,
            validation: SplitName::Val,
            k: 5,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_steps == 0 || self.eval_every == 0 || self.k == 0 {
            bail!(Config, "batch_size, max_steps, eval_every and k must be positive");
        }
        if self.kind.is_contrastive() && self.batch_size < 2 {
            bail!(Usage, "{} needs batch_size >= 2 for in-batch negatives", self.kind);
        }
        if !(self.temperature > 0.0) {
            bail!(Config, "temperature must be positive, got {}", self.temperature);
        }
        if !(0.0..=1.0).contains(&self.noise_ratio) {
            bail!(Config, "noise_ratio {} outside [0,1]", self.noise_ratio);
        }
        if !(0.0..1.0).contains(&self.mask_prob) {
            bail!(Config, "mask_prob {} outside [0,1)", self.mask_prob);
        }
        if !(self.learning_rate > 0.0) || self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            bail!(Config, "learning_rate and grad_clip must be positive");
        }
        Ok(())
    }
}
