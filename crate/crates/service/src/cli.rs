//! The `auditmatch` command line. Each subcommand is a thin wrapper around
//! one library operation; `match` and `serve` share [`run_match`].

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use auditmatch::corpus::{
    corpus_stats, generate_synthetic, holdout_requirements, load_corpus_dir, save_corpus_dir, Corpus, CorpusManifest,
    SplitPlan, SynthConfig,
};
use auditmatch::encoder::Checkpoint;
use auditmatch::evalkit::{evaluate_checkpoint, make_splits, DatasetSplit, SplitName};
use auditmatch::matcher::{build_index, load_index, save_index, IndexItem, ItemKind};
use auditmatch::textprep::{train_vocab, Vocabulary};
use auditmatch::training::{run_pipeline, StageData};
use clap::{Args, Parser, Subcommand};

use crate::config::ServiceConfig;
use crate::error::{ServiceError, ServiceResult};
use crate::http::{run_match, serve, Engine};
use crate::plan::TrainingPlan;
use crate::wire::{Direction, MatchRequest};

/// File the `synth` subcommand writes next to the corpus: generator config,
/// declared counts and the bag-of-words reference recall.
pub const SYNTH_REPORT_FILE: &str = "synth.json";

#[derive(Debug, Parser)]
#[command(name = "auditmatch", version, about = "Match report paragraphs to checklist requirements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a subword vocabulary on a corpus.
    Vocab(VocabArgs),
    /// Run a training plan and save the resulting checkpoint.
    Train(TrainArgs),
    /// Embed requirements and/or paragraphs into an index.
    Index(IndexArgs),
    /// Rank index entries against one text.
    Match(MatchArgs),
    /// One-shot recall@k on the test splits.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic corpus with a seen/unseen split plan.
    Synth(SynthArgs),
    /// Paragraph, word and requirement counts per split.
    Stats(StatsArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct VocabArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 3000)]
    size: usize,
    #[arg(long, default_value_t = 2)]
    min_frequency: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    /// Checkpoint directory to write.
    #[arg(long)]
    out: PathBuf,
    /// Use this vocabulary instead of training one.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Write per-stage JSONL reports here.
    #[arg(long)]
    reports: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum IndexKinds {
    Requirements,
    Paragraphs,
    Both,
}

#[derive(Debug, Args)]
struct IndexArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = IndexKinds::Both)]
    kinds: IndexKinds,
}

#[derive(Debug, Args)]
struct MatchArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long, value_parser = |s: &str| s.parse::<Direction>())]
    direction: Direction,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    text: String,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Restrict to one test split.
    #[arg(long, value_parser = |s: &str| s.parse::<SplitName>().map_err(|e| e.to_string()))]
    split: Option<SplitName>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Print the report as JSON instead of tab-separated lines.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// TOML file with generator settings; flags win over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    requirements: Option<usize>,
    #[arg(long)]
    paragraphs_per_requirement: Option<usize>,
    #[arg(long)]
    distractor_fraction: Option<f64>,
    /// Requirements held out as unseen.
    #[arg(long, default_value_t = 8)]
    unseen: usize,
    /// Train, val and test_seen fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.7, 0.1, 0.2])]
    fractions: Vec<f64>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    listen: Option<String>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
}

/// Runs the command line with process stdout/stderr. Returns the exit code:
/// 0 on success, 1 on a failed operation, 2 on a usage error.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    dispatch_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

/// [`cli_dispatch`] with explicit output streams.
pub fn dispatch_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match run(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn run(cmd: Command, out: &mut dyn Write) -> ServiceResult<()> {
    match cmd {
        Command::Vocab(a) => vocab(a, out),
        Command::Train(a) => train(a, out),
        Command::Index(a) => index(a, out),
        Command::Match(a) => match_cmd(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Synth(a) => synth(a, out),
        Command::Stats(a) => stats(a, out),
        Command::Serve(a) => serve_cmd(a),
    }
}

/// Splits recorded in the corpus manifest, or none.
fn manifest_splits(corpus: &Corpus, manifest: &CorpusManifest) -> ServiceResult<Vec<DatasetSplit>> {
    match &manifest.splits {
        Some(p) => Ok(make_splits(corpus, &p.unseen, p.fractions, p.seed)?),
        None => Ok(Vec::new()),
    }
}

fn require_splits(corpus: &Corpus, manifest: &CorpusManifest, dir: &Path) -> ServiceResult<Vec<DatasetSplit>> {
    if manifest.splits.is_none() {
        return Err(ServiceError::Config(format!("corpus {} has no split plan in its manifest", dir.display())));
    }
    manifest_splits(corpus, manifest)
}

fn vocab_texts<'a>(corpus: &'a Corpus, splits: &'a [DatasetSplit]) -> Vec<&'a str> {
    StageData::new(corpus, splits).unlabeled_texts()
}

fn vocab(a: VocabArgs, out: &mut dyn Write) -> ServiceResult<()> {
    let (corpus, manifest) = load_corpus_dir(&a.corpus)?;
    let splits = manifest_splits(&corpus, &manifest)?;
    let v = train_vocab(vocab_texts(&corpus, &splits), a.size, a.min_frequency)?;
    v.save(&a.out)?;
    writeln!(out, "wrote {} tokens to {}", v.len(), a.out.display())?;
    Ok(())
}

fn train(a: TrainArgs, out: &mut dyn Write) -> ServiceResult<()> {
    let plan = TrainingPlan::from_toml(&fs::read_to_string(&a.plan)?)?;
    let (corpus, manifest) = load_corpus_dir(&a.corpus)?;
    let splits = require_splits(&corpus, &manifest, &a.corpus)?;
    let vocab = match &a.vocab {
        Some(p) => Vocabulary::load(p)?,
        None => train_vocab(vocab_texts(&corpus, &splits), plan.vocab_size, plan.min_frequency)?,
    };
    let init = Checkpoint::init(plan.encoder_config(vocab.len())?, vocab, plan.seed)?;
    let stages = plan.stage_configs()?;
    let (ck, reports) = run_pipeline(&stages, StageData::new(&corpus, &splits), &init, a.reports.as_deref())?;
    ck.save(&a.out)?;
    for r in &reports {
        let v = r.best_validation.map_or("-".to_owned(), |v| format!("{v:.6}"));
        writeln!(
            out,
            "{}\tsteps {}\tselected {}\tvalidation {v}\t{:.1}s",
            r.kind, r.steps_run, r.selected_step, r.wall_clock_secs
        )?;
    }
    writeln!(out, "checkpoint {} written to {}", ck.fingerprint(), a.out.display())?;
    Ok(())
}

fn index(a: IndexArgs, out: &mut dyn Write) -> ServiceResult<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let (corpus, _) = load_corpus_dir(&a.corpus)?;
    let mut items = Vec::new();
    if a.kinds != IndexKinds::Paragraphs {
        items.extend(corpus.requirements.iter().map(|r| IndexItem::new(r.id.clone(), ItemKind::Requirement, r.description.clone())));
    }
    if a.kinds != IndexKinds::Requirements {
        items.extend(corpus.paragraphs.iter().map(|p| IndexItem::new(p.id.clone(), ItemKind::Paragraph, p.text.clone())));
    }
    let idx = build_index(&items, &ck)?;
    save_index(&idx, &a.out)?;
    writeln!(
        out,
        "indexed {} requirements and {} paragraphs into {}",
        idx.count(ItemKind::Requirement),
        idx.count(ItemKind::Paragraph),
        a.out.display()
    )?;
    Ok(())
}

fn match_cmd(a: MatchArgs, out: &mut dyn Write) -> ServiceResult<()> {
    let engine = Engine::new(Checkpoint::load(&a.checkpoint)?, load_index(&a.index)?)?;
    let req = MatchRequest { text: Some(a.text), direction: Some(a.direction), k: Some(a.k) };
    let resp = run_match(Some(&engine), None, &req, a.k).map_err(|e| ServiceError::Config(e.message))?;
    for h in resp.hits {
        writeln!(out, "{}\t{}", h.id, h.score.render())?;
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> ServiceResult<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let (corpus, manifest) = load_corpus_dir(&a.corpus)?;
    let mut splits = require_splits(&corpus, &manifest, &a.corpus)?;
    if let Some(s) = a.split {
        splits.retain(|d| d.name == s);
    }
    let report = evaluate_checkpoint(&ck, &corpus, &splits, a.k)?;
    if a.json {
        writeln!(out, "{}", report.to_json()?)?;
    } else {
        for c in &report.cells {
            writeln!(out, "{}\t{}\t{:.6}\t{}", c.split, c.language, c.recall, c.samples)?;
        }
    }
    Ok(())
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> ServiceResult<()> {
    let mut cfg = match &a.config {
        Some(p) => toml::from_str::<SynthConfig>(&fs::read_to_string(p)?)?,
        None => SynthConfig::default(),
    };
    cfg.seed = a.seed;
    if let Some(n) = a.requirements {
        cfg.n_requirements = n;
        cfg.vocab_themes = cfg.vocab_themes.max(n);
    }
    if let Some(n) = a.paragraphs_per_requirement {
        cfg.paragraphs_per_requirement = n;
    }
    if let Some(f) = a.distractor_fraction {
        cfg.distractor_fraction = f;
    }
    let synth = generate_synthetic(&cfg)?;
    let corpus = &synth.corpus;
    let fractions: [f64; 3] = a.fractions.as_slice().try_into().map_err(|_| ServiceError::Config("--fractions takes three values".into()))?;
    let unseen = holdout_requirements(corpus, a.unseen, a.seed)?;
    // Fail before writing anything if the plan cannot be split.
    make_splits(corpus, &unseen, fractions, a.seed)?;
    let manifest = CorpusManifest::standard(corpus.requirements.len(), Some(SplitPlan { unseen, fractions, seed: a.seed }));
    save_corpus_dir(corpus, &a.out, &manifest)?;
    let report = serde_json::json!({
        "config": synth.config,
        "declared": synth.declared,
        "bow_recall_at_5": synth.bow_recall_at_5,
    });
    fs::write(a.out.join(SYNTH_REPORT_FILE), serde_json::to_string_pretty(&report)?)?;
    writeln!(
        out,
        "wrote {} paragraphs, {} requirements, {} annotations to {}",
        corpus.paragraphs.len(),
        corpus.requirements.len(),
        corpus.annotations.len(),
        a.out.display()
    )?;
    Ok(())
}

fn stats(a: StatsArgs, out: &mut dyn Write) -> ServiceResult<()> {
    let (corpus, manifest) = load_corpus_dir(&a.corpus)?;
    let splits = manifest_splits(&corpus, &manifest)?;
    let mut s = corpus_stats(&corpus, &splits);
    s.checklist_size = manifest.checklist_size;
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&s)?)?;
    } else {
        write!(out, "{}", s.render_table())?;
    }
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> ServiceResult<()> {
    let mut cfg = ServiceConfig::load(a.config.as_deref())?;
    if let Some(v) = a.listen {
        cfg.listen = v;
    }
    if let Some(v) = a.checkpoint {
        cfg.checkpoint = Some(v);
    }
    if let Some(v) = a.index {
        cfg.index = Some(v);
    }
    if let Some(v) = a.corpus {
        cfg.corpus = Some(v);
    }
    if let Some(v) = a.annotations {
        cfg.annotations = v;
    }
    if let Some(v) = a.k {
        cfg.default_k = v;
    }
    serve(&cfg)
}
