//! Server configuration: a TOML file, then `AUDITMATCH_*` environment
//! variables on top.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ServiceError, ServiceResult};

/// Environment variables consulted by [`ServiceConfig::apply_env`], with the
/// key each one overrides.
pub const ENV_KEYS: &[(&str, &str)] = &[
    ("AUDITMATCH_LISTEN", "listen"),
    ("AUDITMATCH_CHECKPOINT", "checkpoint"),
    ("AUDITMATCH_INDEX", "index"),
    ("AUDITMATCH_CORPUS", "corpus"),
    ("AUDITMATCH_ANNOTATIONS", "annotations"),
    ("AUDITMATCH_DEFAULT_K", "default_k"),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Socket address, `host:port`.
    pub listen: String,
    /// Checkpoint directory. Without it (or without `index`) the match
    /// endpoint answers 503.
    pub checkpoint: Option<PathBuf>,
    pub index: Option<PathBuf>,
    /// Corpus directory; ids in annotation events must resolve against it.
    pub corpus: Option<PathBuf>,
    /// Append-only JSONL file, created on first start.
    pub annotations: PathBuf,
    pub default_k: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            checkpoint: None,
            index: None,
            corpus: None,
            annotations: PathBuf::from("annotations.jsonl"),
            default_k: 5,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> ServiceResult<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` if given (defaults otherwise), then applies the process
    /// environment.
    pub fn load(path: Option<&Path>) -> ServiceResult<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_toml(&fs::read_to_string(p)?)?,
            None => ServiceConfig::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    /// Overrides fields from `lookup` (an environment accessor).
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> ServiceResult<()> {
        for (var, key) in ENV_KEYS {
            let Some(v) = lookup(var) else { continue };
            match *key {
                "listen" => self.listen = v,
                "checkpoint" => self.checkpoint = Some(v.into()),
                "index" => self.index = Some(v.into()),
                "corpus" => self.corpus = Some(v.into()),
                "annotations" => self.annotations = v.into(),
                "default_k" => {
                    self.default_k = v.parse().map_err(|_| ServiceError::Config(format!("{var}={v:?} is not a count")))?;
                }
                _ => unreachable!("every key is handled"),
            }
        }
        Ok(())
    }

    /// Startup checks: `k ≥ 1`, a corpus is configured, and every
    /// configured input path exists.
    pub fn validate(&self) -> ServiceResult<()> {
        if self.default_k == 0 {
            return Err(ServiceError::Config("default_k must be at least 1".into()));
        }
        if self.corpus.is_none() {
            return Err(ServiceError::Config("no corpus directory configured".into()));
        }
        for (name, p) in [("checkpoint", &self.checkpoint), ("index", &self.index), ("corpus", &self.corpus)] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(ServiceError::Config(format!("{name} path {} does not exist", p.display())));
                }
            }
        }
        if self.checkpoint.is_some() != self.index.is_some() {
            return Err(ServiceError::Config("checkpoint and index must be configured together".into()));
        }
        Ok(())
    }
}
