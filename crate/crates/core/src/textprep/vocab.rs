use std::collections::HashMap;
use std::fs;
use std::path::Path;

use unicode_normalization::UnicodeNormalization;

use crate::error::{bail, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SEP: u32 = 3;
pub const MASK: u32 = 4;

const RESERVED: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];

/// Marks a piece that continues the previous one inside a word.
pub const CONTINUATION: &str = "##";

/// Longest sequence any encoder accepts.
pub const HARD_MAX_LEN: usize = 512;

/// Subword inventory. Ids are dense and the five reserved tokens occupy 0..=4.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    id_of: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from a token list whose first five entries are the
    /// reserved tokens.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len() || tokens[..5].iter().zip(RESERVED).any(|(a, b)| a != b) {
            bail!(Data, "vocabulary must start with {RESERVED:?}");
        }
        let mut id_of = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                bail!(Data, "vocabulary line {} holds an invalid token {t:?}", i + 1);
            }
            if id_of.insert(t.clone(), i as u32).is_some() {
                bail!(Data, "duplicate token {t:?} at line {}", i + 1);
            }
        }
        Ok(Vocabulary { tokens, id_of })
    }

    fn reserved_only() -> Self {
        Self::from_tokens(RESERVED.iter().map(|s| s.to_string()).collect()).expect("reserved tokens are valid")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.id_of.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    fn push(&mut self, token: String) -> bool {
        if self.id_of.contains_key(&token) {
            return false;
        }
        self.id_of.insert(token.clone(), self.tokens.len() as u32);
        self.tokens.push(token);
        true
    }

    /// One token per line; the line number is the id.
    pub fn to_text(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_tokens(text.lines().map(str::to_owned).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

/// Encoded text: `[CLS] pieces… [SEP] [PAD]…`, always exactly `max_len` long.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
    /// Real-token count (including CLS and SEP) before truncation.
    pub original_length: usize,
}

impl TokenSequence {
    /// Number of non-PAD positions.
    pub fn real_len(&self) -> usize {
        self.attention_mask.iter().filter(|&&m| m == 1).count()
    }

    /// Positions eligible for corruption: real tokens other than CLS and SEP.
    pub fn content_positions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.ids.len()).filter(|&i| self.attention_mask[i] == 1 && self.ids[i] != CLS && self.ids[i] != SEP)
    }
}

fn normalize(text: &str) -> String {
    text.nfc().collect()
}

fn word_symbols(word: &str) -> Vec<String> {
    word.chars()
        .enumerate()
        .map(|(i, c)| if i == 0 { c.to_string() } else { format!("{CONTINUATION}{c}") })
        .collect()
}

fn merged(a: &str, b: &str) -> String {
    format!("{a}{}", b.strip_prefix(CONTINUATION).unwrap_or(b))
}

/// Learns a greedy pair-merge subword vocabulary of at most `target_size`
/// tokens. Words are whitespace-split and every non-initial piece carries the
/// `##` continuation marker.
pub fn train_vocab<'a, I>(texts: I, target_size: usize, min_frequency: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a str>,
{
    if target_size < RESERVED.len() {
        bail!(Config, "target_size {target_size} cannot hold the {} reserved tokens", RESERVED.len());
    }
    let min_frequency = min_frequency.max(1);
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut any_text = false;
    for text in texts {
        any_text = true;
        for w in normalize(text).split_whitespace() {
            *counts.entry(w.to_owned()).or_default() += 1;
        }
    }
    if !any_text || counts.is_empty() {
        bail!(Data, "cannot train a vocabulary on an empty corpus");
    }
    let mut words: Vec<(Vec<String>, usize)> = counts.into_iter().map(|(w, c)| (word_symbols(&w), c)).collect();
    words.sort();

    let mut vocab = Vocabulary::reserved_only();
    let mut symbol_freq: HashMap<&str, usize> = HashMap::new();
    for (syms, c) in &words {
        for s in syms {
            *symbol_freq.entry(s.as_str()).or_default() += c;
        }
    }
    let mut alphabet: Vec<(&str, usize)> = symbol_freq.into_iter().filter(|&(_, f)| f >= min_frequency).collect();
    alphabet.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let alphabet: Vec<String> = alphabet.into_iter().map(|(s, _)| s.to_owned()).collect();
    for s in alphabet {
        if vocab.len() >= target_size {
            return Ok(vocab);
        }
        vocab.push(s);
    }

    while vocab.len() < target_size {
        let mut pairs: HashMap<(&str, &str), usize> = HashMap::new();
        for (syms, c) in &words {
            for w in syms.windows(2) {
                if vocab.id(&w[0]).is_some() && vocab.id(&w[1]).is_some() {
                    *pairs.entry((w[0].as_str(), w[1].as_str())).or_default() += c;
                }
            }
        }
        let best = pairs
            .into_iter()
            .filter(|&(_, c)| c >= min_frequency)
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)));
        let Some(((a, b), _)) = best else { break };
        let (a, b) = (a.to_owned(), b.to_owned());
        let token = merged(&a, &b);
        for (syms, _) in words.iter_mut() {
            let mut i = 0;
            while i + 1 < syms.len() {
                if syms[i] == a && syms[i + 1] == b {
                    syms[i] = token.clone();
                    syms.remove(i + 1);
                }
                i += 1;
            }
        }
        vocab.push(token);
    }
    Ok(vocab)
}

fn word_pieces(word: &str, vocab: &Vocabulary, out: &mut Vec<u32>) {
    let chars: Vec<(usize, char)> = word.char_indices().collect();
    let mut start = 0;
    while start < chars.len() {
        let from = chars[start].0;
        let mut found = None;
        for end in (start + 1..=chars.len()).rev() {
            let to = chars.get(end).map_or(word.len(), |c| c.0);
            let piece = &word[from..to];
            let id = if start == 0 { vocab.id(piece) } else { vocab.id(&format!("{CONTINUATION}{piece}")) };
            if let Some(id) = id {
                found = Some((id, end));
                break;
            }
        }
        match found {
            Some((id, end)) => {
                out.push(id);
                start = end;
            }
            None => {
                out.push(UNK);
                start += 1;
            }
        }
    }
}

/// Encodes `text` as `[CLS] pieces [SEP]`, truncating content so that the
/// result fits `max_len`, then pads with `[PAD]`.
pub fn encode(text: &str, vocab: &Vocabulary, max_len: usize) -> Result<TokenSequence> {
    if !(3..=HARD_MAX_LEN).contains(&max_len) {
        bail!(Usage, "max_len {max_len} outside 3..={HARD_MAX_LEN}");
    }
    let mut pieces = Vec::new();
    for w in normalize(text).split_whitespace() {
        word_pieces(w, vocab, &mut pieces);
    }
    let original_length = pieces.len() + 2;
    pieces.truncate(max_len - 2);
    let mut ids = Vec::with_capacity(max_len);
    ids.push(CLS);
    ids.extend_from_slice(&pieces);
    ids.push(SEP);
    let real = ids.len();
    ids.resize(max_len, PAD);
    let mut attention_mask = vec![1u8; real];
    attention_mask.resize(max_len, 0);
    Ok(TokenSequence { ids, attention_mask, original_length })
}

/// Inverse of [`encode`] for covered words. PAD, CLS and SEP are dropped;
/// MASK and UNK appear as their literal surface forms.
pub fn decode(seq: &TokenSequence, vocab: &Vocabulary) -> Result<String> {
    let mut out = String::new();
    for &id in &seq.ids {
        let Some(tok) = vocab.token(id) else {
            bail!(Data, "token id {id} out of range for vocabulary of {}", vocab.len());
        };
        match id {
            PAD | CLS | SEP => continue,
            _ => {}
        }
        match tok.strip_prefix(CONTINUATION) {
            Some(rest) if id != MASK && id != UNK && !out.is_empty() => out.push_str(rest),
            _ => {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(tok);
            }
        }
    }
    Ok(out)
}
