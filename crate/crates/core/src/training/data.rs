use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;

use super::losses::{DenoisingExample, MaskedExample};
use crate::corpus::Corpus;
use crate::error::{bail, Result};
use crate::evalkit::{DatasetSplit, SplitName};
use crate::textprep::{apply_mlm_mask, apply_tsdae_noise, encode, TokenSequence, Vocabulary};
use crate::util::{mix_seed, rng_for};

/// What a stage trains and validates on.
#[derive(Clone, Copy, Debug)]
pub struct StageData<'a> {
    pub corpus: &'a Corpus,
    pub splits: &'a [DatasetSplit],
}

impl<'a> StageData<'a> {
    pub fn new(corpus: &'a Corpus, splits: &'a [DatasetSplit]) -> Self {
        StageData { corpus, splits }
    }

    pub fn split(&self, name: SplitName) -> Option<&'a DatasetSplit> {
        self.splits.iter().find(|s| s.name == name)
    }

    /// Raw text for the unsupervised stages: every paragraph outside the
    /// val and test splits, then every requirement description. No labels
    /// are involved.
    pub fn unlabeled_texts(&self) -> Vec<&'a str> {
        let held_out: HashSet<&str> = self
            .splits
            .iter()
            .filter(|s| s.name != SplitName::Train)
            .flat_map(|s| s.records.iter().map(|r| r.paragraph_id.as_str()))
            .collect();
        let corpus = self.corpus;
        corpus
            .paragraphs
            .iter()
            .filter(|p| !held_out.contains(p.id.as_str()))
            .map(|p| p.text.as_str())
            .chain(corpus.requirements.iter().map(|r| r.description.as_str()))
            .collect()
    }

    /// (paragraph text, requirement id, requirement text) for every train
    /// annotation, in split order.
    pub fn train_pairs(&self) -> Result<Vec<(&'a str, &'a str, &'a str)>> {
        let Some(train) = self.split(SplitName::Train) else {
            bail!(Data, "no train split");
        };
        train
            .records
            .iter()
            .map(|r| {
                let p = self.corpus.paragraph(&r.paragraph_id);
                let q = self.corpus.requirement(&r.requirement_id);
                match (p, q) {
                    (Some(p), Some(q)) => Ok((p.text.as_str(), q.id.as_str(), q.description.as_str())),
                    _ => bail!(Data, "train record {} -> {} does not resolve", r.paragraph_id, r.requirement_id),
                }
            })
            .collect()
    }
}

pub(crate) fn encode_all(texts: &[&str], vocab: &Vocabulary, max_len: usize) -> Result<Vec<TokenSequence>> {
    texts.iter().map(|t| encode(t, vocab, max_len)).collect()
}

pub(crate) fn trimmed(seq: &TokenSequence) -> Vec<u32> {
    seq.ids[..seq.real_len()].to_vec()
}

/// Epoch-wise shuffled index stream.
#[derive(Debug)]
pub(crate) struct EpochSampler {
    n: usize,
    seed: u64,
    epoch: u64,
    queue: VecDeque<usize>,
}

impl EpochSampler {
    pub fn new(n: usize, seed: u64) -> Self {
        EpochSampler { n, seed, epoch: 0, queue: VecDeque::new() }
    }

    fn refill(&mut self) {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.shuffle(&mut rng_for(self.seed, &[0xE90C, self.epoch]));
        self.epoch += 1;
        self.queue.extend(order);
    }

    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let size = size.min(self.n);
        while self.queue.len() < size {
            self.refill();
        }
        self.queue.drain(..size).collect()
    }

    /// Like `next_batch`, but never puts two indices with the same key in
    /// one batch. Skipped indices stay queued, in order, for later batches.
    pub fn next_distinct_batch<K: Eq + std::hash::Hash>(&mut self, size: usize, key: impl Fn(usize) -> K) -> Vec<usize> {
        let distinct = (0..self.n).map(&key).collect::<HashSet<_>>().len();
        let size = size.min(distinct);
        let mut batch = Vec::with_capacity(size);
        let mut used = HashSet::new();
        let mut i = 0;
        while batch.len() < size {
            if i == self.queue.len() {
                self.refill();
            }
            if used.insert(key(self.queue[i])) {
                batch.push(self.queue.remove(i).expect("index in range"));
            } else {
                i += 1;
            }
        }
        batch
    }
}

/// MLM inputs for `seqs`, one corruption seed per sequence.
pub fn prepare_mlm_batch(seqs: &[&TokenSequence], vocab_size: usize, mask_prob: f64, seed: u64) -> Result<Vec<MaskedExample>> {
    seqs.iter()
        .enumerate()
        .map(|(i, s)| {
            let (noisy, targets) = apply_mlm_mask(s, vocab_size, mask_prob, mix_seed(seed, i as u64))?;
            Ok(MaskedExample { ids: trimmed(&noisy), targets })
        })
        .collect()
}

/// Denoising inputs for `seqs`, one noise seed per sequence.
pub fn prepare_tsdae_batch(seqs: &[&TokenSequence], noise_ratio: f64, seed: u64) -> Result<Vec<DenoisingExample>> {
    seqs.iter()
        .enumerate()
        .map(|(i, s)| {
            let noisy = apply_tsdae_noise(s, noise_ratio, mix_seed(seed, i as u64))?;
            Ok(DenoisingExample { noisy: trimmed(&noisy), clean: trimmed(s) })
        })
        .collect()
}
