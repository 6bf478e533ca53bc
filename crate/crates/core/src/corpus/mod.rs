//! Paragraphs, requirements and annotations: data model, line-delimited
//! storage, Table-style statistics, and a seeded synthetic corpus generator.

mod bow;
mod io;
mod records;
mod stats;
mod synth;

pub use bow::bag_of_words_recall;
pub use io::{
    annotations_tsv, load_annotations, load_corpus, load_corpus_dir, save_corpus, save_corpus_dir, write_annotations, CorpusManifest,
    CorpusPaths, SplitPlan,
};
pub use records::{AnnotationRecord, Corpus, ParagraphRecord, RequirementRecord};
pub use stats::{corpus_stats, word_count, CorpusStats, StatsRow};
pub use synth::{generate_synthetic, holdout_requirements, DeclaredCounts, SynthConfig, SyntheticCorpus};
