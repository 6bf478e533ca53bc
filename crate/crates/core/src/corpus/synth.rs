//! Seeded synthetic corpus.
//!
//! Every requirement owns a theme: a pool of three-syllable pseudo-words.
//! Its description and its paragraphs draw some content words from that
//! pool and pad with two-syllable filler words. Paragraph filler comes from
//! one pool per language tag, description filler from a separate pool, so
//! the only signal linking a paragraph to its requirement is theme overlap.
//! Distractor paragraphs are filler only. Extra unannotated paragraphs per
//! theme play the part of raw report text for the unsupervised stages.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bow::bag_of_words_recall;
use super::records::{AnnotationRecord, Corpus, ParagraphRecord, RequirementRecord};
use super::stats::word_count;
use crate::error::{bail, Result};
use crate::util::rng_for;

const CONSONANTS: &[char] = &['b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z'];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];
const PARAGRAPHS_PER_REPORT: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_requirements: usize,
    pub paragraphs_per_requirement: usize,
    /// Number of themes. The first `n_requirements` belong to requirements;
    /// the rest only appear in unannotated text.
    pub vocab_themes: usize,
    /// Distractors as a fraction of annotated + distractor paragraphs.
    pub distractor_fraction: f64,
    pub theme_words: usize,
    pub filler_words: usize,
    pub description_filler_words: usize,
    /// Inclusive word-count range of a paragraph.
    pub paragraph_words: (usize, usize),
    /// Inclusive range of theme words per paragraph.
    pub paragraph_content: (usize, usize),
    pub description_words: (usize, usize),
    pub description_content: (usize, usize),
    /// Fraction of annotated paragraphs that mix two themes and carry two
    /// annotations.
    pub multi_label_fraction: f64,
    pub unlabeled_per_theme: usize,
    /// Length and theme-word ranges of the unannotated theme paragraphs,
    /// which stand in for raw domain text and run denser than annotated ones.
    pub unlabeled_words: (usize, usize),
    pub unlabeled_content: (usize, usize),
    pub languages: Vec<String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_requirements: 50,
            paragraphs_per_requirement: 20,
            vocab_themes: 50,
            distractor_fraction: 0.2,
            theme_words: 12,
            filler_words: 150,
            description_filler_words: 40,
            paragraph_words: (30, 40),
            paragraph_content: (3, 6),
            description_words: (16, 22),
            description_content: (3, 4),
            multi_label_fraction: 0.05,
            unlabeled_per_theme: 40,
            unlabeled_words: (12, 18),
            unlabeled_content: (5, 8),
            languages: vec!["de".into(), "en".into()],
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_requirements < 2 {
            bail!(Config, "n_requirements must be at least 2");
        }
        if self.paragraphs_per_requirement < 1 {
            bail!(Config, "paragraphs_per_requirement must be at least 1");
        }
        if self.vocab_themes < self.n_requirements {
            bail!(Config, "{} themes cannot cover {} requirements", self.vocab_themes, self.n_requirements);
        }
        if !(0.0..1.0).contains(&self.distractor_fraction) || !(0.0..=1.0).contains(&self.multi_label_fraction) {
            bail!(Config, "distractor_fraction must lie in [0,1) and multi_label_fraction in [0,1]");
        }
        if self.theme_words == 0 || self.filler_words == 0 || self.description_filler_words == 0 || self.languages.is_empty() {
            bail!(Config, "word pools and language list must be non-empty");
        }
        for (name, (lo, hi)) in [
            ("paragraph_words", self.paragraph_words),
            ("paragraph_content", self.paragraph_content),
            ("description_words", self.description_words),
            ("description_content", self.description_content),
            ("unlabeled_words", self.unlabeled_words),
            ("unlabeled_content", self.unlabeled_content),
        ] {
            if lo > hi || hi == 0 {
                bail!(Config, "{name} range ({lo}, {hi}) is empty");
            }
        }
        if self.paragraph_content.1 > self.paragraph_words.0
            || self.description_content.1 > self.description_words.0
            || self.unlabeled_content.1 > self.unlabeled_words.0
        {
            bail!(Config, "content word counts exceed the shortest text length");
        }
        if self.description_content.1 > self.theme_words {
            bail!(Config, "descriptions need {} distinct theme words, pools hold {}", self.description_content.1, self.theme_words);
        }
        let syl = CONSONANTS.len() * VOWELS.len();
        if self.vocab_themes * self.theme_words > syl.pow(3) / 2 {
            bail!(Config, "theme pools need {} distinct content words, more than the generator supplies", self.vocab_themes * self.theme_words);
        }
        if self.languages.len() * self.filler_words + self.description_filler_words > syl.pow(2) / 2 {
            bail!(Config, "filler pools exceed the generator's word inventory");
        }
        Ok(())
    }
}

/// Counts the generator commits to before writing anything.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclaredCounts {
    pub requirements: usize,
    pub annotated_paragraphs: usize,
    pub multi_label_paragraphs: usize,
    pub distractor_paragraphs: usize,
    pub unlabeled_paragraphs: usize,
    pub annotations: usize,
    pub annotated_words: usize,
    pub unannotated_words: usize,
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub config: SynthConfig,
    pub declared: DeclaredCounts,
    /// Recall@5 of bag-of-words cosine over every annotated paragraph.
    pub bow_recall_at_5: f64,
}

fn syllable(rng: &mut ChaCha8Rng) -> String {
    let c = CONSONANTS[rng.gen_range(0..CONSONANTS.len())];
    let v = VOWELS[rng.gen_range(0..VOWELS.len())];
    format!("{c}{v}")
}

fn word_pool(rng: &mut ChaCha8Rng, n: usize, syllables: usize, taken: &mut HashSet<String>) -> Vec<String> {
    let mut pool = Vec::with_capacity(n);
    while pool.len() < n {
        let w: String = (0..syllables).map(|_| syllable(rng)).collect();
        if taken.insert(w.clone()) {
            pool.push(w);
        }
    }
    pool
}

fn in_range(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    rng.gen_range(lo..=hi)
}

/// Shuffled mix of `content` plus filler up to `total` words.
fn compose(rng: &mut ChaCha8Rng, mut content: Vec<String>, filler: &[String], total: usize) -> String {
    while content.len() < total {
        content.push(filler.choose(rng).unwrap().clone());
    }
    content.shuffle(rng);
    content.join(" ")
}

fn draw(rng: &mut ChaCha8Rng, pool: &[String], n: usize) -> Vec<String> {
    (0..n).map(|_| pool.choose(rng).unwrap().clone()).collect()
}

/// `letter_number_number` ids: A_1_1 … A_5_5, B_1_1, …
fn requirement_id(i: usize) -> String {
    let mut section = i / 25;
    let mut letters = String::new();
    loop {
        letters.insert(0, (b'A' + (section % 26) as u8) as char);
        if section < 26 {
            break;
        }
        section = section / 26 - 1;
    }
    format!("{letters}_{}_{}", (i % 25) / 5 + 1, i % 5 + 1)
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let cfg = config;
    let mut rng = rng_for(cfg.seed, &[0x5e_17]);
    let mut taken = HashSet::new();
    let themes: Vec<Vec<String>> = (0..cfg.vocab_themes).map(|_| word_pool(&mut rng, cfg.theme_words, 3, &mut taken)).collect();
    let fillers: Vec<Vec<String>> = cfg.languages.iter().map(|_| word_pool(&mut rng, cfg.filler_words, 2, &mut taken)).collect();
    let desc_filler = word_pool(&mut rng, cfg.description_filler_words, 2, &mut taken);

    let requirements: Vec<RequirementRecord> = (0..cfg.n_requirements)
        .map(|i| {
            let n = in_range(&mut rng, cfg.description_content);
            let content: Vec<String> = themes[i].choose_multiple(&mut rng, n).cloned().collect();
            let total = in_range(&mut rng, cfg.description_words);
            RequirementRecord {
                id: requirement_id(i),
                description: compose(&mut rng, content, &desc_filler, total),
                language: cfg.languages[i % cfg.languages.len()].clone(),
            }
        })
        .collect();

    // Each item: (themes, annotated requirement indices). Empty themes = distractor.
    let n_annotated = cfg.n_requirements * cfg.paragraphs_per_requirement;
    let n_multi = (n_annotated as f64 * cfg.multi_label_fraction).round() as usize;
    let mut items: Vec<(Vec<usize>, bool)> = (0..n_annotated).map(|j| (vec![j % cfg.n_requirements], true)).collect();
    for item in items.iter_mut().take(n_multi) {
        let first = item.0[0];
        let second = (first + rng.gen_range(1..cfg.n_requirements)) % cfg.n_requirements;
        item.0.push(second);
    }
    let n_distractors = (n_annotated as f64 * cfg.distractor_fraction / (1.0 - cfg.distractor_fraction)).round() as usize;
    items.extend((0..n_distractors).map(|_| (Vec::new(), true)));
    items.shuffle(&mut rng);
    let n_unlabeled = cfg.vocab_themes * cfg.unlabeled_per_theme;
    let mut raw: Vec<(Vec<usize>, bool)> = (0..n_unlabeled).map(|j| (vec![j % cfg.vocab_themes], false)).collect();
    raw.shuffle(&mut rng);
    items.extend(raw);

    let n_reports = items.len().div_ceil(PARAGRAPHS_PER_REPORT);
    let report_lang: Vec<usize> = (0..n_reports).map(|_| rng.gen_range(0..cfg.languages.len())).collect();
    let width = items.len().to_string().len();
    let rwidth = n_reports.to_string().len();

    let mut paragraphs = Vec::with_capacity(items.len());
    let mut annotations = Vec::new();
    let mut declared = DeclaredCounts {
        requirements: cfg.n_requirements,
        annotated_paragraphs: n_annotated,
        multi_label_paragraphs: n_multi,
        distractor_paragraphs: n_distractors,
        unlabeled_paragraphs: n_unlabeled,
        annotations: n_annotated + n_multi,
        annotated_words: 0,
        unannotated_words: 0,
    };
    for (j, (theme_ids, labeled)) in items.iter().enumerate() {
        let report = j / PARAGRAPHS_PER_REPORT;
        let lang = report_lang[report];
        let (words, content_range) =
            if *labeled { (cfg.paragraph_words, cfg.paragraph_content) } else { (cfg.unlabeled_words, cfg.unlabeled_content) };
        let total = in_range(&mut rng, words);
        let n_content = if theme_ids.is_empty() { 0 } else { in_range(&mut rng, content_range) };
        let mut content = Vec::with_capacity(n_content);
        for c in 0..n_content {
            let t = theme_ids[c % theme_ids.len()];
            content.extend(draw(&mut rng, &themes[t], 1));
        }
        let text = compose(&mut rng, content, &fillers[lang], total);
        let prefix = match (labeled, theme_ids.is_empty()) {
            (true, false) => "P",
            (true, true) => "D",
            (false, _) => "U",
        };
        let id = format!("{prefix}{j:0width$}");
        if *labeled && !theme_ids.is_empty() {
            declared.annotated_words += word_count(&text);
            for &t in theme_ids {
                annotations.push(AnnotationRecord::new(id.clone(), requirement_id(t)));
            }
        } else {
            declared.unannotated_words += word_count(&text);
        }
        paragraphs.push(ParagraphRecord {
            id,
            text,
            report_id: format!("R{report:0rwidth$}"),
            language: cfg.languages[lang].clone(),
        });
    }

    let corpus = Corpus::new(paragraphs, requirements, annotations)?;
    let bow_recall_at_5 = bag_of_words_recall(&corpus, 5)?;
    Ok(SyntheticCorpus { corpus, config: cfg.clone(), declared, bow_recall_at_5 })
}

/// Picks `n` requirement ids uniformly at random, returned sorted.
pub fn holdout_requirements(corpus: &Corpus, n: usize, seed: u64) -> Result<Vec<String>> {
    if n >= corpus.requirements.len() {
        bail!(Usage, "cannot hold out {n} of {} requirements", corpus.requirements.len());
    }
    let mut rng = rng_for(seed, &[0x401d]);
    let mut ids: Vec<String> = corpus.requirements.choose_multiple(&mut rng, n).map(|r| r.id.clone()).collect();
    ids.sort();
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig { seed, n_requirements: 6, paragraphs_per_requirement: 4, vocab_themes: 7, unlabeled_per_theme: 2, ..Default::default() }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate_synthetic(&small(3)).unwrap();
        let b = generate_synthetic(&small(3)).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_ne!(a.corpus, generate_synthetic(&small(4)).unwrap().corpus);
    }

    #[test]
    fn declared_counts_hold() {
        let s = generate_synthetic(&small(1)).unwrap();
        let c = &s.corpus;
        let d = &s.declared;
        assert_eq!(c.requirements.len(), d.requirements);
        assert_eq!(c.annotations.len(), d.annotations);
        assert_eq!(c.gold().len(), d.annotated_paragraphs);
        assert_eq!(c.paragraphs.iter().filter(|p| p.id.starts_with('D')).count(), d.distractor_paragraphs);
        assert_eq!(c.paragraphs.iter().filter(|p| p.id.starts_with('U')).count(), d.unlabeled_paragraphs);
        assert_eq!(d.distractor_paragraphs, 6);
    }

    #[test]
    fn zero_distractors_means_every_labeled_paragraph_is_annotated() {
        let s = generate_synthetic(&SynthConfig { distractor_fraction: 0.0, unlabeled_per_theme: 0, ..small(2) }).unwrap();
        assert_eq!(s.corpus.unannotated_paragraphs().count(), 0);
    }

    #[test]
    fn too_few_themes_is_a_config_error() {
        let err = generate_synthetic(&SynthConfig { vocab_themes: 3, ..small(0) }).unwrap_err();
        assert!(matches!(err, crate::Error::Config(_)));
    }

    #[test]
    fn requirement_ids_have_three_parts_and_are_unique() {
        let ids: HashSet<String> = (0..2000).map(requirement_id).collect();
        assert_eq!(ids.len(), 2000);
        assert_eq!(requirement_id(0), "A_1_1");
        assert_eq!(requirement_id(26), "B_1_2");
        assert!(requirement_id(1999).split('_').count() == 3);
    }

    #[test]
    fn holdout_is_seeded_subset() {
        let s = generate_synthetic(&small(5)).unwrap();
        let h = holdout_requirements(&s.corpus, 2, 9).unwrap();
        assert_eq!(h, holdout_requirements(&s.corpus, 2, 9).unwrap());
        assert_eq!(h.len(), 2);
        assert!(h.iter().all(|id| s.corpus.requirement(id).is_some()));
        assert!(holdout_requirements(&s.corpus, 6, 0).is_err());
    }
}
