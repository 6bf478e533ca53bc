use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{StageConfig, StageKind};
use super::data::{encode_all, prepare_mlm_batch, prepare_tsdae_batch, trimmed, EpochSampler, StageData};
use super::decoder::decoder_layout;
use super::losses::{mlm_loss, simcse_loss, supervised_loss, tsdae_loss};
use crate::encoder::{
    bind_encoder, encode_text, init_params, Checkpoint, DropoutPlan, EncoderConfig, EncoderWeights, StageRecord,
};
use crate::error::{bail, Error, Result};
use crate::evalkit::{evaluate_embeddings, ALL_LANGUAGES};
use crate::matcher::{build_index, IndexItem, ItemKind};
use crate::numcore::{adam_step, AdamConfig, AdamState, Graph, Tensor, Var};
use crate::util::mix_seed;

/// One line of a stage report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportLine {
    pub step: u64,
    /// Missing for the step-0 validation and for batches without targets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub kind: StageKind,
    pub seed: u64,
    pub steps_run: u64,
    pub lines: Vec<ReportLine>,
    /// Step whose weights were kept (argmax of the validation curve, earliest
    /// on ties); the last step when nothing was validated.
    pub selected_step: u64,
    pub best_validation: Option<f64>,
    pub wall_clock_secs: f64,
}

impl StageReport {
    pub fn losses(&self) -> Vec<(u64, f64)> {
        self.lines.iter().filter_map(|l| l.loss.map(|v| (l.step, v))).collect()
    }

    pub fn validation_curve(&self) -> Vec<(u64, f64)> {
        self.lines.iter().filter_map(|l| l.validation.map(|v| (l.step, v))).collect()
    }

    /// Writes one JSON object per line.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for line in &self.lines {
            serde_json::to_writer(&mut out, line)?;
            out.push(b'\n');
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&out)?;
        Ok(())
    }
}

type StepResult = Option<(f64, Vec<Vec<f32>>)>;

/// Parameter gradients in order; untouched parameters get zeros.
fn collect_grads(g: &Graph<f32>, vars: &[Var], params: &[Tensor<f32>]) -> Vec<Vec<f32>> {
    vars.iter()
        .zip(params)
        .map(|(&v, p)| g.grad(v).map_or_else(|| vec![0.0; p.len()], <[f32]>::to_vec))
        .collect()
}

fn clip(grads: &mut [Vec<f32>], max_norm: f64) {
    let norm = grads.iter().flatten().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = (max_norm / norm) as f32;
        grads.iter_mut().flatten().for_each(|x| *x *= s);
    }
}

/// Optimizes `params` (encoder tensors first, then stage-only tensors) and
/// keeps the encoder part of the best-validating step.
fn optimize<S, E>(
    cfg: &StageConfig,
    mut params: Vec<Tensor<f32>>,
    n_encoder: usize,
    mut step_fn: S,
    mut eval_fn: E,
) -> Result<(Vec<Tensor<f32>>, StageReport)>
where
    S: FnMut(u64, &[Tensor<f32>]) -> Result<StepResult>,
    E: FnMut(&[Tensor<f32>]) -> Result<Option<f64>>,
{
    let started = Instant::now();
    let adam_cfg = AdamConfig { learning_rate: cfg.learning_rate, ..AdamConfig::default() };
    let mut adam = AdamState::new(adam_cfg, &params);
    let mut lines = Vec::new();
    let mut best: Option<(f64, u64, Vec<Tensor<f32>>)> = None;
    let mut stale = 0u64;
    let mut consider = |step: u64, metric: Option<f64>, params: &[Tensor<f32>], stale: &mut u64| {
        let Some(m) = metric else { return };
        if best.as_ref().is_none_or(|(b, _, _)| m > *b) {
            best = Some((m, step, params[..n_encoder].to_vec()));
            *stale = 0;
        } else {
            *stale += 1;
        }
    };
    let initial = eval_fn(&params)?;
    lines.push(ReportLine { step: 0, loss: None, validation: initial });
    consider(0, initial, &params, &mut stale);
    let mut steps_run = 0;
    for step in 1..=cfg.max_steps {
        let loss = match step_fn(step, &params)? {
            Some((loss, mut grads)) => {
                if !loss.is_finite() {
                    bail!(Data, "{} loss became non-finite at step {step}", cfg.kind);
                }
                if let Some(c) = cfg.grad_clip {
                    clip(&mut grads, c);
                }
                adam_step(&mut params, &grads, &mut adam)?;
                Some(loss)
            }
            None => None,
        };
        steps_run = step;
        let validation = if step % cfg.eval_every == 0 || step == cfg.max_steps { eval_fn(&params)? } else { None };
        lines.push(ReportLine { step, loss, validation });
        consider(step, validation, &params, &mut stale);
        if cfg.patience.is_some_and(|p| stale >= p) {
            break;
        }
    }
    let (best_validation, selected_step, encoder) = match best {
        Some((m, s, w)) => (Some(m), s, w),
        None => (None, steps_run, params[..n_encoder].to_vec()),
    };
    let report = StageReport {
        kind: cfg.kind,
        seed: cfg.rng_seed,
        steps_run,
        lines,
        selected_step,
        best_validation,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok((encoder, report))
}

fn with_weights(base: &Checkpoint, params: &[Tensor<f32>]) -> Result<Checkpoint> {
    Ok(Checkpoint {
        weights: EncoderWeights::from_params(*base.config(), params.to_vec())?,
        vocab: base.vocab.clone(),
        provenance: base.provenance.clone(),
        best_validation: base.best_validation,
    })
}

fn finish(base: &Checkpoint, encoder: Vec<Tensor<f32>>, report: &StageReport) -> Result<Checkpoint> {
    let mut out = with_weights(base, &encoder)?;
    out.provenance.push(StageRecord {
        kind: report.kind.as_str().to_owned(),
        steps: report.steps_run,
        selected_step: report.selected_step,
        seed: report.seed,
        validation_score: report.best_validation,
    });
    if report.best_validation.is_some() {
        out.best_validation = report.best_validation;
    }
    Ok(out)
}

/// Validation recall@k of `params` on the configured split, ranking against
/// every requirement. `None` when the split is missing or empty.
fn recall_eval<'a>(
    data: StageData<'a>,
    base: &'a Checkpoint,
    cfg: &'a StageConfig,
) -> impl FnMut(&[Tensor<f32>]) -> Result<Option<f64>> + 'a {
    let items: Vec<IndexItem> = data
        .corpus
        .requirements
        .iter()
        .map(|r| IndexItem::new(r.id.clone(), ItemKind::Requirement, r.description.clone()))
        .collect();
    let split = data.split(cfg.validation).filter(|s| !s.records.is_empty()).cloned();
    move |params| {
        let Some(split) = &split else { return Ok(None) };
        let ck = with_weights(base, &params[..base.weights.params.len()])?;
        let index = build_index(&items, &ck)?;
        let report = evaluate_embeddings(&index, |p| encode_text(&p.text, &ck), data.corpus, std::slice::from_ref(split), cfg.k, "")?;
        Ok(report.cells.iter().find(|c| c.language == ALL_LANGUAGES).map(|c| c.recall))
    }
}

fn check_kind(cfg: &StageConfig, kind: StageKind) -> Result<()> {
    cfg.validate()?;
    if cfg.kind != kind {
        bail!(Usage, "{kind} stage called with a {} config", cfg.kind);
    }
    Ok(())
}

fn dropout(config: &EncoderConfig, seed: u64, step: u64) -> Option<DropoutPlan> {
    Some(DropoutPlan { prob: config.dropout_prob, seed: mix_seed(mix_seed(seed, 0xD50), step) })
}

/// Masked-token pretraining with a readout tied to the token embeddings.
/// Selection uses negated loss on the validation paragraphs.
pub fn mlm_stage(data: StageData<'_>, checkpoint: &Checkpoint, cfg: &StageConfig) -> Result<(Checkpoint, StageReport)> {
    check_kind(cfg, StageKind::Mlm)?;
    let ec = *checkpoint.config();
    let texts = data.unlabeled_texts();
    if texts.is_empty() {
        bail!(Data, "no text to pretrain on");
    }
    let seqs = encode_all(&texts, &checkpoint.vocab, ec.max_len)?;
    let val_texts: Vec<&str> = data
        .split(cfg.validation)
        .map(|s| s.paragraph_ids().into_iter().filter_map(|id| data.corpus.paragraph(id)).map(|p| p.text.as_str()).collect())
        .unwrap_or_default();
    let val_seqs = encode_all(&val_texts, &checkpoint.vocab, ec.max_len)?;
    let val_batch = prepare_mlm_batch(&val_seqs.iter().collect::<Vec<_>>(), ec.vocab_size, cfg.mask_prob, mix_seed(cfg.rng_seed, 0x7A1))?;

    let mut params = checkpoint.weights.params.clone();
    params.push(Tensor::zeros(&[ec.vocab_size]));
    let n_enc = checkpoint.weights.params.len();
    let mut sampler = EpochSampler::new(seqs.len(), cfg.rng_seed);
    let step_fn = |step: u64, params: &[Tensor<f32>]| -> Result<StepResult> {
        let idx = sampler.next_batch(cfg.batch_size);
        let batch_seqs: Vec<_> = idx.iter().map(|&i| &seqs[i]).collect();
        let batch = prepare_mlm_batch(&batch_seqs, ec.vocab_size, cfg.mask_prob, mix_seed(cfg.rng_seed, step))?;
        let mut g = Graph::new();
        let vars: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
        let Some(loss) = mlm_loss(&mut g, &vars[..n_enc], vars[n_enc], &ec, &batch, dropout(&ec, cfg.rng_seed, step))? else {
            return Ok(None);
        };
        g.backward(loss)?;
        Ok(Some((g.value(loss).item() as f64, collect_grads(&g, &vars, params))))
    };
    let eval_fn = |params: &[Tensor<f32>]| -> Result<Option<f64>> {
        let mut g = Graph::new();
        let vars: Vec<Var> = params.iter().map(|p| g.constant(p.clone())).collect();
        Ok(mlm_loss(&mut g, &vars[..n_enc], vars[n_enc], &ec, &val_batch, None)?.map(|l| -(g.value(l).item() as f64)))
    };
    let (enc, report) = optimize(cfg, params, n_enc, step_fn, eval_fn)?;
    Ok((finish(checkpoint, enc, &report)?, report))
}

/// Contrastive training on two dropout views of each unlabeled text.
pub fn simcse_stage(data: StageData<'_>, checkpoint: &Checkpoint, cfg: &StageConfig) -> Result<(Checkpoint, StageReport)> {
    check_kind(cfg, StageKind::Simcse)?;
    let ec = *checkpoint.config();
    let texts = data.unlabeled_texts();
    if texts.len() < 2 {
        bail!(Data, "simcse needs at least two texts");
    }
    let seqs: Vec<Vec<u32>> = encode_all(&texts, &checkpoint.vocab, ec.max_len)?.iter().map(trimmed).collect();
    let mut sampler = EpochSampler::new(seqs.len(), cfg.rng_seed);
    let step_fn = |step: u64, params: &[Tensor<f32>]| -> Result<StepResult> {
        let batch: Vec<Vec<u32>> = sampler.next_batch(cfg.batch_size).into_iter().map(|i| seqs[i].clone()).collect();
        let mut g = Graph::new();
        let weights = EncoderWeights { config: ec, params: params.to_vec() };
        let vars = bind_encoder(&mut g, &weights, true);
        let loss = simcse_loss(&mut g, &vars, &ec, &batch, cfg.temperature, dropout(&ec, cfg.rng_seed, step))?;
        g.backward(loss)?;
        Ok(Some((g.value(loss).item() as f64, collect_grads(&g, &vars, params))))
    };
    let eval_fn = recall_eval(data, checkpoint, cfg);
    let n_enc = checkpoint.weights.params.len();
    let (enc, report) = optimize(cfg, checkpoint.weights.params.clone(), n_enc, step_fn, eval_fn)?;
    Ok((finish(checkpoint, enc, &report)?, report))
}

/// Denoising autoencoder training. A fresh decoder is created, trained
/// jointly with the encoder, and discarded at the end.
pub fn tsdae_stage(data: StageData<'_>, checkpoint: &Checkpoint, cfg: &StageConfig) -> Result<(Checkpoint, StageReport)> {
    check_kind(cfg, StageKind::Tsdae)?;
    let ec = *checkpoint.config();
    let texts = data.unlabeled_texts();
    if texts.is_empty() {
        bail!(Data, "no text to train the denoiser on");
    }
    let seqs = encode_all(&texts, &checkpoint.vocab, ec.max_len)?;
    let n_enc = checkpoint.weights.params.len();
    let mut params = checkpoint.weights.params.clone();
    params.extend(init_params::<f32>(&decoder_layout(&ec), mix_seed(cfg.rng_seed, 0xDEC)));
    let mut sampler = EpochSampler::new(seqs.len(), cfg.rng_seed);
    let step_fn = |step: u64, params: &[Tensor<f32>]| -> Result<StepResult> {
        let idx = sampler.next_batch(cfg.batch_size);
        let batch_seqs: Vec<_> = idx.iter().map(|&i| &seqs[i]).collect();
        let batch = prepare_tsdae_batch(&batch_seqs, cfg.noise_ratio, mix_seed(cfg.rng_seed, step))?;
        let mut g = Graph::new();
        let vars: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
        let loss = tsdae_loss(&mut g, &vars[..n_enc], &vars[n_enc..], &ec, &batch, dropout(&ec, cfg.rng_seed, step))?;
        g.backward(loss)?;
        Ok(Some((g.value(loss).item() as f64, collect_grads(&g, &vars, params))))
    };
    let eval_fn = recall_eval(data, checkpoint, cfg);
    let (enc, report) = optimize(cfg, params, n_enc, step_fn, eval_fn)?;
    Ok((finish(checkpoint, enc, &report)?, report))
}

/// Paragraph/requirement contrastive matching on the train split. Batches
/// never hold two pairs with the same requirement.
pub fn supervised_stage(data: StageData<'_>, checkpoint: &Checkpoint, cfg: &StageConfig) -> Result<(Checkpoint, StageReport)> {
    check_kind(cfg, StageKind::Supervised)?;
    let ec = *checkpoint.config();
    let pairs = data.train_pairs()?;
    let distinct: std::collections::HashSet<&str> = pairs.iter().map(|p| p.1).collect();
    if distinct.len() < 2 {
        bail!(Usage, "supervised training needs pairs for at least two requirements");
    }
    let enc_text = |t: &str| -> Result<Vec<u32>> { Ok(trimmed(&crate::textprep::encode(t, &checkpoint.vocab, ec.max_len)?)) };
    let encoded: Vec<(Vec<u32>, Vec<u32>)> = pairs.iter().map(|(p, _, r)| Ok((enc_text(p)?, enc_text(r)?))).collect::<Result<_>>()?;
    let mut sampler = EpochSampler::new(pairs.len(), cfg.rng_seed);
    let step_fn = |step: u64, params: &[Tensor<f32>]| -> Result<StepResult> {
        let idx = sampler.next_distinct_batch(cfg.batch_size, |i| pairs[i].1);
        let batch: Vec<(Vec<u32>, Vec<u32>)> = idx.into_iter().map(|i| encoded[i].clone()).collect();
        let mut g = Graph::new();
        let weights = EncoderWeights { config: ec, params: params.to_vec() };
        let vars = bind_encoder(&mut g, &weights, true);
        let loss = supervised_loss(&mut g, &vars, &ec, &batch, cfg.temperature, dropout(&ec, cfg.rng_seed, step))?;
        g.backward(loss)?;
        Ok(Some((g.value(loss).item() as f64, collect_grads(&g, &vars, params))))
    };
    let eval_fn = recall_eval(data, checkpoint, cfg);
    let n_enc = checkpoint.weights.params.len();
    let (enc, report) = optimize(cfg, checkpoint.weights.params.clone(), n_enc, step_fn, eval_fn)?;
    Ok((finish(checkpoint, enc, &report)?, report))
}

pub fn run_stage(data: StageData<'_>, checkpoint: &Checkpoint, cfg: &StageConfig) -> Result<(Checkpoint, StageReport)> {
    match cfg.kind {
        StageKind::Mlm => mlm_stage(data, checkpoint, cfg),
        StageKind::Simcse => simcse_stage(data, checkpoint, cfg),
        StageKind::Tsdae => tsdae_stage(data, checkpoint, cfg),
        StageKind::Supervised => supervised_stage(data, checkpoint, cfg),
    }
}

/// Runs `plan` in order, each stage starting from the previous checkpoint.
/// When `report_dir` is given, stage `i` writes `stage-{i}-{kind}.jsonl`
/// there.
pub fn run_pipeline(
    plan: &[StageConfig],
    data: StageData<'_>,
    checkpoint: &Checkpoint,
    report_dir: Option<&Path>,
) -> Result<(Checkpoint, Vec<StageReport>)> {
    if plan.is_empty() {
        bail!(Usage, "empty training plan");
    }
    if let Some(dir) = report_dir {
        fs::create_dir_all(dir)?;
    }
    let mut current = checkpoint.clone();
    let mut reports = Vec::with_capacity(plan.len());
    for (index, cfg) in plan.iter().enumerate() {
        let wrap = |e: Error| Error::Stage { index, kind: cfg.kind.to_string(), source: Box::new(e) };
        let (next, report) = run_stage(data, &current, cfg).map_err(wrap)?;
        if let Some(dir) = report_dir {
            report.write_jsonl(&dir.join(format!("stage-{index}-{}.jsonl", cfg.kind))).map_err(wrap)?;
        }
        current = next;
        reports.push(report);
    }
    Ok((current, reports))
}
