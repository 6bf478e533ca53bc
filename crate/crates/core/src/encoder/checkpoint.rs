use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::EncoderConfig;
use super::embedding::SentenceEmbedding;
use super::forward::{bind_encoder, embed_sequence};
use super::weights::EncoderWeights;
use crate::error::{bail, Result};
use crate::numcore::{Graph, Tensor};
use crate::textprep::{encode, Vocabulary};
use crate::util::sha256_hex;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const VOCAB_FILE: &str = "vocab.txt";
const WEIGHTS_FILE: &str = "weights.bin";

/// One completed training stage, as recorded in a checkpoint's provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub kind: String,
    pub steps: u64,
    pub selected_step: u64,
    pub seed: u64,
    pub validation_score: Option<f64>,
}

/// Encoder weights, configuration and vocabulary plus training provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub weights: EncoderWeights<f32>,
    pub vocab: Vocabulary,
    pub provenance: Vec<StageRecord>,
    pub best_validation: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    config: EncoderConfig,
    vocabulary: String,
    weights: String,
    tensors: Vec<String>,
    provenance: Vec<StageRecord>,
    best_validation: Option<f64>,
}

impl Checkpoint {
    /// A randomly initialized, untrained checkpoint.
    pub fn init(config: EncoderConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        if config.vocab_size != vocab.len() {
            bail!(Config, "config vocab_size {} but vocabulary has {} tokens", config.vocab_size, vocab.len());
        }
        Ok(Checkpoint { weights: EncoderWeights::init(config, seed)?, vocab, provenance: Vec::new(), best_validation: None })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.weights.config
    }

    /// Stage kinds joined by `→`, or `untrained`.
    pub fn provenance_label(&self) -> String {
        if self.provenance.is_empty() {
            "untrained".to_owned()
        } else {
            self.provenance.iter().map(|s| s.kind.as_str()).collect::<Vec<_>>().join("→")
        }
    }

    pub fn embed(&self, text: &str) -> Result<SentenceEmbedding> {
        encode_text(text, self)
    }

    fn weights_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        for (name, t) in self.weights.layout().names.iter().zip(&self.weights.params) {
            buf.write_all(&(name.len() as u32).to_le_bytes())?;
            buf.write_all(name.as_bytes())?;
            t.write_to(&mut buf)?;
        }
        Ok(buf)
    }

    /// Hash of configuration, vocabulary and weights (not provenance).
    pub fn fingerprint(&self) -> String {
        let mut bytes = serde_json::to_vec(self.config()).expect("config serializes");
        bytes.extend_from_slice(self.vocab.to_text().as_bytes());
        bytes.extend_from_slice(&self.weights_bytes().expect("in-memory write"));
        sha256_hex(&bytes)[..16].to_owned()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: *self.config(),
            vocabulary: VOCAB_FILE.into(),
            weights: WEIGHTS_FILE.into(),
            tensors: self.weights.layout().names,
            provenance: self.provenance.clone(),
            best_validation: self.best_validation,
        };
        fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
        self.vocab.save(&dir.join(VOCAB_FILE))?;
        let mut w = BufWriter::new(fs::File::create(dir.join(WEIGHTS_FILE))?);
        w.write_all(&self.weights_bytes()?)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)?;
        if manifest.format_version != CHECKPOINT_FORMAT_VERSION {
            bail!(Data, "unsupported checkpoint format version {}", manifest.format_version);
        }
        let vocab = Vocabulary::load(&dir.join(&manifest.vocabulary))?;
        let mut r = BufReader::new(fs::File::open(dir.join(&manifest.weights))?);
        let mut params = Vec::with_capacity(manifest.tensors.len());
        for expected in &manifest.tensors {
            let mut len = [0u8; 4];
            r.read_exact(&mut len)?;
            let mut name = vec![0u8; u32::from_le_bytes(len) as usize];
            r.read_exact(&mut name)?;
            if name != expected.as_bytes() {
                bail!(Data, "weights file has tensor {:?} where {expected:?} was expected", String::from_utf8_lossy(&name));
            }
            params.push(Tensor::read_from(&mut r)?);
        }
        let weights = EncoderWeights::from_params(manifest.config, params)?;
        if weights.config.vocab_size != vocab.len() {
            bail!(Data, "vocabulary has {} tokens, config expects {}", vocab.len(), weights.config.vocab_size);
        }
        Ok(Checkpoint { weights, vocab, provenance: manifest.provenance, best_validation: manifest.best_validation })
    }
}

/// Sentence embedding of `text`: encode, run the encoder in inference mode
/// over the real tokens, mean-pool.
pub fn encode_text(text: &str, checkpoint: &Checkpoint) -> Result<SentenceEmbedding> {
    let cfg = checkpoint.config();
    let seq = encode(text, &checkpoint.vocab, cfg.max_len)?;
    let ids = &seq.ids[..seq.real_len()];
    let mut g = Graph::<f32>::new();
    let vars = bind_encoder(&mut g, &checkpoint.weights, false);
    let pooled = embed_sequence(&mut g, &vars, cfg, ids, None)?;
    SentenceEmbedding::new(g.value(pooled).data().to_vec())
}
