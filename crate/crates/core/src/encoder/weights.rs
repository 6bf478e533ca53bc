use rand_distr::{Distribution, Normal};

use super::config::EncoderConfig;
use crate::error::{bail, Result};
use crate::numcore::{Real, Tensor};
use crate::util::rng_for;

pub(crate) const INIT_STD: f64 = 0.02;

/// Named parameter shapes in a fixed order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamLayout {
    pub names: Vec<String>,
    pub shapes: Vec<Vec<usize>>,
}

impl ParamLayout {
    pub(crate) fn push(&mut self, name: impl Into<String>, shape: &[usize]) {
        self.names.push(name.into());
        self.shapes.push(shape.to_vec());
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Index of the first tensor of layer `l` in an encoder layout.
    pub(crate) fn encoder_layer_base(l: usize) -> usize {
        2 + l * ENCODER_LAYER_TENSORS
    }

    pub fn encoder(cfg: &EncoderConfig) -> Self {
        let (d, f) = (cfg.hidden_dim, cfg.ff_dim);
        let mut lay = ParamLayout { names: Vec::new(), shapes: Vec::new() };
        lay.push("token_embedding", &[cfg.vocab_size, d]);
        lay.push("position_embedding", &[cfg.max_len, d]);
        for l in 0..cfg.num_layers {
            let p = format!("layer{l}");
            lay.push(format!("{p}.attn_norm.gain"), &[d]);
            lay.push(format!("{p}.attn_norm.bias"), &[d]);
            for proj in ["query", "key", "value", "output"] {
                lay.push(format!("{p}.attn.{proj}.weight"), &[d, d]);
                lay.push(format!("{p}.attn.{proj}.bias"), &[d]);
            }
            lay.push(format!("{p}.ff_norm.gain"), &[d]);
            lay.push(format!("{p}.ff_norm.bias"), &[d]);
            lay.push(format!("{p}.ff.in.weight"), &[d, f]);
            lay.push(format!("{p}.ff.in.bias"), &[f]);
            lay.push(format!("{p}.ff.out.weight"), &[f, d]);
            lay.push(format!("{p}.ff.out.bias"), &[d]);
        }
        lay.push("final_norm.gain", &[d]);
        lay.push("final_norm.bias", &[d]);
        lay
    }
}

pub(crate) const ENCODER_LAYER_TENSORS: usize = 16;

/// Initializes tensors for `layout`: N(0, 0.02) for matrices and embeddings,
/// ones for norm gains, zeros for biases.
pub fn init_params<T: Real>(layout: &ParamLayout, seed: u64) -> Vec<Tensor<T>> {
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    layout
        .names
        .iter()
        .zip(&layout.shapes)
        .enumerate()
        .map(|(i, (name, shape))| {
            if name.ends_with(".gain") {
                Tensor::filled(shape, T::one())
            } else if name.ends_with(".bias") {
                Tensor::zeros(shape)
            } else {
                let mut rng = rng_for(seed, &[0x1417, i as u64]);
                let n = shape.iter().product();
                let data = (0..n).map(|_| T::of(normal.sample(&mut rng))).collect();
                Tensor::new(shape.clone(), data).expect("finite init")
            }
        })
        .collect()
}

/// One weight set, used for both sides of every comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderWeights<T: Real = f32> {
    pub config: EncoderConfig,
    pub params: Vec<Tensor<T>>,
}

impl<T: Real> EncoderWeights<T> {
    pub fn init(config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = init_params(&ParamLayout::encoder(&config), seed);
        Ok(EncoderWeights { config, params })
    }

    pub fn from_params(config: EncoderConfig, params: Vec<Tensor<T>>) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::encoder(&config);
        if params.len() != layout.len() {
            bail!(Data, "expected {} encoder tensors, got {}", layout.len(), params.len());
        }
        for ((p, shape), name) in params.iter().zip(&layout.shapes).zip(&layout.names) {
            if p.shape() != shape.as_slice() {
                bail!(Data, "tensor {name} has shape {:?}, expected {shape:?}", p.shape());
            }
        }
        Ok(EncoderWeights { config, params })
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::encoder(&self.config)
    }

    pub fn cast<U: Real>(&self) -> EncoderWeights<U> {
        EncoderWeights { config: self.config, params: self.params.iter().map(Tensor::cast).collect() }
    }
}
