//! Test oracles shared by the integration suites: central finite
//! differences in f64, an exhaustive ranking sort, a brute-force recall
//! count, and small fixtures.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use auditmatch::encoder::{init_params, DropoutPlan, EncoderConfig, ParamLayout};
use auditmatch::matcher::RankedList;
use auditmatch::numcore::{Graph, Tensor, Var};
use auditmatch::textprep::MlmTarget;
use auditmatch::training::decoder_layout;
use auditmatch::training::losses::{
    mlm_loss, simcse_loss, supervised_loss, tsdae_loss, DenoisingExample, MaskedExample,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-4;
pub const FD_TOLERANCE: f64 = 1e-4;
/// Gradients smaller than this are compared on an absolute scale.
pub const FD_FLOOR: f64 = 1e-3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

/// Worst relative error between backprop and central differences for a
/// scalar function of `inputs`. `coords[i]` lists which entries of input i
/// to probe; `None` probes all of them.
pub fn fd_check<F>(inputs: &[Tensor<f64>], coords: &[Option<Vec<usize>>], f: F) -> f64
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Var,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let loss = f(&mut g, &vars);
    g.backward(loss).unwrap();
    let analytic: Vec<Vec<f64>> =
        vars.iter().zip(inputs).map(|(&v, t)| g.grad(v).map_or(vec![0.0; t.len()], |s| s.to_vec())).collect();
    let eval = |perturbed: &[Tensor<f64>]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| g.constant(t.clone())).collect();
        let out = f(&mut g, &vars);
        g.value(out).item()
    };
    let mut worst = 0.0f64;
    for (i, t) in inputs.iter().enumerate() {
        let probe: Vec<usize> = coords[i].clone().unwrap_or_else(|| (0..t.len()).collect());
        for j in probe {
            let mut xs = inputs.to_vec();
            xs[i].data_mut()[j] = t.data()[j] + FD_STEP;
            let up = eval(&xs);
            xs[i].data_mut()[j] = t.data()[j] - FD_STEP;
            let down = eval(&xs);
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic[i][j], numeric));
        }
    }
    worst
}

/// Scalar readout `sum(out ⊙ w)` with fixed random weights, so every output
/// entry contributes a distinct upstream gradient.
pub fn readout(g: &mut Graph<f64>, out: Var, seed: u64) -> Var {
    let shape = g.value(out).shape().to_vec();
    let w = g.constant(uniform(&mut rng(seed), &shape));
    g.dot(out, w).unwrap()
}

/// Tiny model for gradient checks: 2 layers, hidden 8.
pub fn grad_config() -> EncoderConfig {
    EncoderConfig { vocab_size: 23, hidden_dim: 8, num_layers: 2, num_heads: 2, ff_dim: 16, max_len: 12, dropout_prob: 0.1 }
}

/// Parameters drawn around the usual init with extra uniform spread so no
/// gradient is trivially tiny.
pub fn spread_params(layout: &ParamLayout, seed: u64) -> Vec<Tensor<f64>> {
    let mut r = rng(seed ^ 0xABCD);
    init_params::<f64>(layout, seed)
        .into_iter()
        .map(|t| {
            let data = t.data().iter().map(|&v| v + r.gen_range(-0.5..0.5)).collect();
            Tensor::new(t.shape().to_vec(), data).unwrap()
        })
        .collect()
}

/// A few coordinates per tensor, always including the first and last.
pub fn sample_coords(params: &[Tensor<f64>], per_tensor: usize, seed: u64) -> Vec<Option<Vec<usize>>> {
    let mut r = rng(seed);
    params
        .iter()
        .map(|t| {
            let mut c = vec![0, t.len() - 1];
            c.extend((0..per_tensor.saturating_sub(2)).map(|_| r.gen_range(0..t.len())));
            Some(c)
        })
        .collect()
}

fn token_ids(r: &mut ChaCha8Rng, cfg: &EncoderConfig, len: usize) -> Vec<u32> {
    let mut ids = vec![2];
    ids.extend((0..len - 2).map(|_| r.gen_range(5..cfg.vocab_size as u32)));
    ids.push(3);
    ids
}

pub const GRAD_DROPOUT: Option<DropoutPlan> = Some(DropoutPlan { prob: 0.1, seed: 99 });

/// Worst FD error of each stage loss over every encoder (and head/decoder)
/// tensor, in the order mlm, simcse, tsdae, supervised.
pub fn loss_gradient_errors(per_tensor: usize) -> Vec<(&'static str, f64)> {
    let cfg = grad_config();
    let enc_layout = ParamLayout::encoder(&cfg);
    let enc = spread_params(&enc_layout, 1);
    let n_enc = enc.len();
    let mut r = rng(5);
    let texts: Vec<Vec<u32>> = (0..3).map(|i| token_ids(&mut r, &cfg, 5 + i)).collect();
    let mut out = Vec::new();

    let mut mlm_inputs = enc.clone();
    mlm_inputs.push(uniform(&mut r, &[cfg.vocab_size]));
    let masked: Vec<MaskedExample> = texts
        .iter()
        .map(|ids| {
            let mut noisy = ids.clone();
            noisy[1] = 4;
            noisy[3] = 4;
            let targets = vec![MlmTarget { position: 1, original: ids[1] }, MlmTarget { position: 3, original: ids[3] }];
            MaskedExample { ids: noisy, targets }
        })
        .collect();
    let coords = sample_coords(&mlm_inputs, per_tensor, 11);
    out.push((
        "mlm",
        fd_check(&mlm_inputs, &coords, |g, v| mlm_loss(g, &v[..n_enc], v[n_enc], &cfg, &masked, GRAD_DROPOUT).unwrap().unwrap()),
    ));

    let coords = sample_coords(&enc, per_tensor, 12);
    out.push(("simcse", fd_check(&enc, &coords, |g, v| simcse_loss(g, v, &cfg, &texts, 0.05, GRAD_DROPOUT).unwrap())));

    let mut tsdae_inputs = enc.clone();
    tsdae_inputs.extend(spread_params(&decoder_layout(&cfg), 2));
    let denoise: Vec<DenoisingExample> = texts
        .iter()
        .map(|ids| {
            let mut noisy = ids.clone();
            noisy[2] = 4;
            DenoisingExample { noisy, clean: ids.clone() }
        })
        .collect();
    let coords = sample_coords(&tsdae_inputs, per_tensor, 13);
    out.push((
        "tsdae",
        fd_check(&tsdae_inputs, &coords, |g, v| tsdae_loss(g, &v[..n_enc], &v[n_enc..], &cfg, &denoise, GRAD_DROPOUT).unwrap()),
    ));

    let pairs: Vec<(Vec<u32>, Vec<u32>)> = (0..3).map(|i| (texts[i].clone(), token_ids(&mut r, &cfg, 4 + i))).collect();
    let coords = sample_coords(&enc, per_tensor, 14);
    out.push(("supervised", fd_check(&enc, &coords, |g, v| supervised_loss(g, v, &cfg, &pairs, 0.05, GRAD_DROPOUT).unwrap())));
    out
}

type OpBuilder = Box<dyn Fn(&mut Graph<f64>, &[Var]) -> Var>;

/// Every differentiable graph operation with random inputs in [-1, 1].
pub fn op_catalog() -> Vec<(&'static str, Vec<Vec<usize>>, OpBuilder)> {
    fn op(f: impl Fn(&mut Graph<f64>, &[Var]) -> Var + 'static) -> OpBuilder {
        Box::new(f)
    }
    vec![
        ("matmul", vec![vec![3, 4], vec![4, 2]], op(|g, v| g.matmul(v[0], v[1]).unwrap())),
        ("matmul_t", vec![vec![3, 4], vec![5, 4]], op(|g, v| g.matmul_t(v[0], v[1]).unwrap())),
        ("transpose", vec![vec![3, 4]], op(|g, v| g.transpose(v[0]))),
        ("add", vec![vec![2, 3], vec![2, 3]], op(|g, v| g.add(v[0], v[1]).unwrap())),
        ("mul", vec![vec![2, 3], vec![2, 3]], op(|g, v| g.mul(v[0], v[1]).unwrap())),
        ("scale", vec![vec![2, 3]], op(|g, v| g.scale(v[0], -1.7))),
        ("add_row", vec![vec![3, 4], vec![4]], op(|g, v| g.add_row(v[0], v[1]).unwrap())),
        ("gelu", vec![vec![3, 4]], op(|g, v| g.gelu(v[0]))),
        ("softmax_rows", vec![vec![3, 5]], op(|g, v| g.softmax_rows(v[0]))),
        (
            "masked_softmax_rows",
            vec![vec![2, 3]],
            op(|g, v| g.masked_softmax_rows(v[0], &[true, false, true, true, true, false]).unwrap()),
        ),
        ("layer_norm", vec![vec![3, 8], vec![8], vec![8]], op(|g, v| g.layer_norm(v[0], v[1], v[2], 1e-5).unwrap())),
        ("dropout", vec![vec![4, 4]], op(|g, v| g.dropout(v[0], 0.3, 17).unwrap())),
        ("gather_rows", vec![vec![5, 3]], op(|g, v| g.gather_rows(v[0], &[4, 0, 4, 2]).unwrap())),
        ("slice_cols", vec![vec![3, 6]], op(|g, v| g.slice_cols(v[0], 2, 3).unwrap())),
        ("concat_cols", vec![vec![2, 3], vec![2, 2]], op(|g, v| g.concat_cols(&[v[0], v[1]]).unwrap())),
        ("concat_rows", vec![vec![2, 3], vec![1, 3]], op(|g, v| g.concat_rows(&[v[0], v[1]]).unwrap())),
        ("masked_mean_rows", vec![vec![4, 3]], op(|g, v| g.masked_mean_rows(v[0], &[true, false, true, true]).unwrap())),
        ("normalize_rows", vec![vec![3, 4]], op(|g, v| g.normalize_rows(v[0]).unwrap())),
        ("cross_entropy", vec![vec![3, 5]], op(|g, v| g.cross_entropy(v[0], &[0, 4, 2]).unwrap())),
        ("sum", vec![vec![2, 3]], op(|g, v| g.sum(v[0]))),
        ("dot", vec![vec![2, 3], vec![2, 3]], op(|g, v| g.dot(v[0], v[1]).unwrap())),
    ]
}

/// FD error of every catalog op, each reduced to a scalar by a random readout.
pub fn op_gradient_errors(seed: u64) -> Vec<(&'static str, f64)> {
    op_catalog()
        .into_iter()
        .enumerate()
        .map(|(i, (name, shapes, build))| {
            let mut r = rng(seed + i as u64);
            let inputs: Vec<Tensor<f64>> = shapes.iter().map(|s| uniform(&mut r, s)).collect();
            let coords = vec![None; inputs.len()];
            let err = fd_check(&inputs, &coords, |g, v| {
                let out = build(g, v);
                if g.value(out).len() == 1 {
                    out
                } else {
                    readout(g, out, seed ^ 0x5EED)
                }
            });
            (name, err)
        })
        .collect()
}

/// Ranking oracle: score every candidate, sort by (score desc, id asc).
pub fn exhaustive_rank(scores: &[(String, f32)], k: usize) -> Vec<String> {
    let mut all = scores.to_vec();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.into_iter().take(k).map(|(id, _)| id).collect()
}

/// Recall oracle: count hits one paragraph at a time.
pub fn brute_force_recall(predictions: &[RankedList], gold: &HashMap<String, HashSet<String>>, k: usize) -> f64 {
    let mut hits = 0;
    for p in predictions {
        let mut found = false;
        for h in p.hits.iter().take(k) {
            for g in &gold[&p.query_id] {
                if *g == h.item_id {
                    found = true;
                }
            }
        }
        if found {
            hits += 1;
        }
    }
    hits as f64 / predictions.len() as f64
}
