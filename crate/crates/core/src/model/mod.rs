//! Pre-norm Transformer encoder-decoder computing `log p(y_j | y_<j, X)`,
//! with embedding-level injection points for word dropout masks and
//! additive (adversarial) offsets.

mod checkpoint;
mod decode;
mod forward;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_FORMAT,
};
pub use decode::{greedy_decode, greedy_decode_batch};
pub use forward::{embed, forward, forward_batch, positional_encoding, ForwardOutput, ModelInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Src,
    Tgt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab_size_src: usize,
    pub vocab_size_tgt: usize,
    #[serde(default = "defaults::d_model")]
    pub d_model: usize,
    #[serde(default = "defaults::n_heads")]
    pub n_heads: usize,
    #[serde(default = "defaults::n_layers")]
    pub n_layers_enc: usize,
    #[serde(default = "defaults::n_layers")]
    pub n_layers_dec: usize,
    #[serde(default = "defaults::d_ffn")]
    pub d_ffn: usize,
    #[serde(default = "defaults::max_len")]
    pub max_len: usize,
}

pub(crate) mod defaults {
    pub fn d_model() -> usize {
        64
    }
    pub fn n_heads() -> usize {
        2
    }
    pub fn n_layers() -> usize {
        2
    }
    pub fn d_ffn() -> usize {
        128
    }
    pub fn max_len() -> usize {
        32
    }
}

impl ModelConfig {
    pub fn new(vocab_size_src: usize, vocab_size_tgt: usize, max_len: usize) -> Self {
        ModelConfig {
            vocab_size_src,
            vocab_size_tgt,
            d_model: defaults::d_model(),
            n_heads: defaults::n_heads(),
            n_layers_enc: defaults::n_layers(),
            n_layers_dec: defaults::n_layers(),
            d_ffn: defaults::d_ffn(),
            max_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.vocab_size_src < 4 || self.vocab_size_tgt < 4 {
            return bad("vocabularies need at least 4 entries".into());
        }
        if self.d_model == 0 || self.n_heads == 0 || self.d_ffn == 0 {
            return bad("d_model, n_heads and d_ffn must be positive".into());
        }
        if self.d_model % self.n_heads != 0 {
            return bad(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.max_len < 3 {
            return bad("max_len must be at least 3".into());
        }
        Ok(())
    }

    pub fn vocab_size(&self, side: Side) -> usize {
        match side {
            Side::Src => self.vocab_size_src,
            Side::Tgt => self.vocab_size_tgt,
        }
    }

    /// Name and shape of every parameter tensor, in canonical order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let (d, f) = (self.d_model, self.d_ffn);
        let mut out = vec![
            ("src_embed".to_string(), vec![self.vocab_size_src, d]),
            ("tgt_embed".to_string(), vec![self.vocab_size_tgt, d]),
        ];
        let ln = |out: &mut Vec<(String, Vec<usize>)>, p: &str| {
            out.push((format!("{p}.g"), vec![d]));
            out.push((format!("{p}.b"), vec![d]));
        };
        let attn = |out: &mut Vec<(String, Vec<usize>)>, p: &str| {
            for w in ["wq", "wk", "wv", "wo"] {
                out.push((format!("{p}.{w}"), vec![d, d]));
            }
        };
        let ffn = |out: &mut Vec<(String, Vec<usize>)>, p: &str| {
            out.push((format!("{p}.w1"), vec![d, f]));
            out.push((format!("{p}.w2"), vec![f, d]));
        };
        for l in 0..self.n_layers_enc {
            ln(&mut out, &format!("enc.{l}.ln1"));
            attn(&mut out, &format!("enc.{l}.self_attn"));
            ln(&mut out, &format!("enc.{l}.ln2"));
            ffn(&mut out, &format!("enc.{l}.ffn"));
        }
        ln(&mut out, "enc.ln_f");
        for l in 0..self.n_layers_dec {
            ln(&mut out, &format!("dec.{l}.ln1"));
            attn(&mut out, &format!("dec.{l}.self_attn"));
            ln(&mut out, &format!("dec.{l}.ln2"));
            attn(&mut out, &format!("dec.{l}.cross_attn"));
            ln(&mut out, &format!("dec.{l}.ln3"));
            ffn(&mut out, &format!("dec.{l}.ffn"));
        }
        ln(&mut out, "dec.ln_f");
        out.push(("out_proj".to_string(), vec![d, self.vocab_size_tgt]));
        out
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> usize {
        let (d, f) = (self.d_model, self.d_ffn);
        let enc_layer = 4 * d * d + 2 * d * f + 4 * d;
        let dec_layer = 8 * d * d + 2 * d * f + 6 * d;
        (self.vocab_size_src + self.vocab_size_tgt) * d
            + self.n_layers_enc * enc_layer
            + self.n_layers_dec * dec_layer
            + 4 * d
            + d * self.vocab_size_tgt
    }
}

/// All learnable weights, addressable by name.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    tensors: BTreeMap<String, Tensor>,
}

impl ModelParams {
    /// Random initialization: embeddings and projections ~ N(0, 1/fan_in),
    /// layer-norm gains one and biases zero.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut tensors = BTreeMap::new();
        for (name, shape) in config.param_shapes() {
            let t = if name.ends_with(".g") {
                Tensor::full(&shape, 1.0)
            } else if name.ends_with(".b") {
                Tensor::zeros(&shape)
            } else {
                let fan_in = if name.ends_with("_embed") {
                    shape[1]
                } else {
                    shape[0]
                };
                let normal = Normal::new(0.0, (1.0 / fan_in as f64).sqrt()).expect("valid std");
                let n = shape.iter().product();
                Tensor::new(shape, (0..n).map(|_| normal.sample(rng)).collect())?
            };
            tensors.insert(name, t);
        }
        Ok(ModelParams {
            config: config.clone(),
            tensors,
        })
    }

    /// Assembles parameters from named tensors, checking names and shapes
    /// against `config`.
    pub fn from_tensors(
        config: ModelConfig,
        mut tensors: BTreeMap<String, Tensor>,
    ) -> Result<Self> {
        config.validate()?;
        let mut out = BTreeMap::new();
        for (name, shape) in config.param_shapes() {
            let t = tensors
                .remove(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
            if !t.is_finite() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` has non-finite values"
                )));
            }
            out.insert(name, t);
        }
        if let Some(extra) = tensors.keys().next() {
            return Err(Error::Checkpoint(format!("unexpected tensor `{extra}`")));
        }
        Ok(ModelParams {
            config,
            tensors: out,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn get(&self, name: &str) -> &Tensor {
        self.tensors
            .get(name)
            .unwrap_or_else(|| panic!("no parameter named `{name}`"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        self.tensors
            .get_mut(name)
            .unwrap_or_else(|| panic!("no parameter named `{name}`"))
    }

    pub fn embeddings(&self, side: Side) -> &Tensor {
        match side {
            Side::Src => self.get("src_embed"),
            Side::Tgt => self.get("tgt_embed"),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn num_params(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Puts every tensor on `tape` as a leaf.
    pub fn register(&self, tape: &mut Tape) -> Result<ParamVars> {
        let vars = self
            .tensors
            .iter()
            .map(|(k, v)| Ok((k.clone(), tape.leaf(v.clone())?)))
            .collect::<Result<_>>()?;
        Ok(ParamVars {
            config: self.config.clone(),
            vars,
        })
    }
}

/// Parameters as recorded on one tape.
#[derive(Debug, Clone)]
pub struct ParamVars {
    config: ModelConfig,
    vars: BTreeMap<String, Var>,
}

impl ParamVars {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn get(&self, name: &str) -> Var {
        *self
            .vars
            .get(name)
            .unwrap_or_else(|| panic!("no parameter named `{name}`"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Substitutes the node used for parameter `name`.
    pub fn replace(&mut self, name: &str, var: Var) {
        let slot = self
            .vars
            .get_mut(name)
            .unwrap_or_else(|| panic!("no parameter named `{name}`"));
        *slot = var;
    }
}

/// Per-position word-dropout mask (`b_i`) and additive offsets (`r_i`)
/// applied to the word embeddings of one side. Rows follow the batch layout
/// (`batch * seq_len` rows).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingInjection {
    pub dropout_mask: Option<Vec<f64>>,
    pub offsets: Option<Tensor>,
}

impl EmbeddingInjection {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_identity(&self) -> bool {
        self.dropout_mask.is_none() && self.offsets.is_none()
    }
}
