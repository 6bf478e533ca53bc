//! Training plan files.
//!
//! A plan is TOML: a seed, vocabulary settings, optional encoder overrides
//! and an ordered `[[stages]]` list. Each stage table names its `kind` and
//! overrides any subset of that kind's defaults.
//!
//! ```toml
//! seed = 3
//!
//! [[stages]]
//! kind = "mlm"
//!
//! [[stages]]
//! kind = "supervised"
//! max_steps = 400
//! ```

use auditmatch::encoder::EncoderConfig;
use auditmatch::training::{StageConfig, StageKind};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{ServiceError, ServiceResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingPlan {
    /// Seeds weight init and every stage that does not set `rng_seed`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_vocab_size")]
    pub vocab_size: usize,
    #[serde(default = "default_min_frequency")]
    pub min_frequency: usize,
    /// Overrides of the desk-scale encoder; `vocab_size` always comes from
    /// the vocabulary.
    #[serde(default)]
    pub encoder: toml::Table,
    pub stages: Vec<toml::Table>,
}

fn default_vocab_size() -> usize {
    3000
}

fn default_min_frequency() -> usize {
    2
}

/// Overlays `table` on the JSON form of `base`. Keys must already exist in
/// `base`; the string `"none"` clears an optional field.
fn overlay<T: Serialize + serde::de::DeserializeOwned>(base: &T, table: &toml::Table, what: &str, skip: &[&str]) -> ServiceResult<T> {
    let mut v = serde_json::to_value(base)?;
    let obj = v.as_object_mut().expect("config structs serialize to objects");
    for (key, val) in table {
        if skip.contains(&key.as_str()) {
            continue;
        }
        if !obj.contains_key(key) {
            return Err(ServiceError::Config(format!("unknown {what} key {key:?}")));
        }
        let val = match val {
            toml::Value::String(s) if s == "none" => Value::Null,
            other => serde_json::to_value(other)?,
        };
        obj.insert(key.clone(), val);
    }
    serde_json::from_value(v).map_err(|e| ServiceError::Config(format!("{what}: {e}")))
}

impl TrainingPlan {
    pub fn from_toml(text: &str) -> ServiceResult<Self> {
        let plan: TrainingPlan = toml::from_str(text)?;
        if plan.stages.is_empty() {
            return Err(ServiceError::Config("plan has no stages".into()));
        }
        plan.stage_configs()?;
        plan.encoder_config(plan.vocab_size)?;
        Ok(plan)
    }

    /// The desk-scale encoder with this plan's overrides.
    pub fn encoder_config(&self, vocab_size: usize) -> ServiceResult<EncoderConfig> {
        let cfg = overlay(&EncoderConfig::desk(vocab_size), &self.encoder, "encoder", &["vocab_size"])?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn stage_configs(&self) -> ServiceResult<Vec<StageConfig>> {
        self.stages
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let Some(kind) = t.get("kind").and_then(|k| k.as_str()) else {
                    return Err(ServiceError::Config(format!("stage {i} has no kind")));
                };
                let kind: StageKind = kind.parse()?;
                let cfg = overlay(&StageConfig::new(kind).with_seed(self.seed), t, &format!("stage {i}"), &[])?;
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }
}
