use std::collections::BTreeMap;

use rand::Rng;

use super::sample::{
    adversarial_offsets, replace_tokens, word_dropout_mask, ReplacementDistribution,
    SimilarityTable,
};
use super::{decay_alpha, PerturbationStrategy, ReplacementKind};
use crate::autodiff::{Tape, Tensor};
use crate::data::{is_special, Batch, TokenId};
use crate::error::Result;
use crate::model::{forward_batch, EmbeddingInjection, ModelInput, ModelParams, Side};
use crate::train::nll_loss;

/// Perturbed decoder/encoder inputs for one batch. Shapes match the clean
/// batch; reserved ids are never altered, masked or offset.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedBatch {
    pub src: Vec<TokenId>,
    pub tgt_in: Vec<TokenId>,
    pub src_injection: EmbeddingInjection,
    pub tgt_injection: EmbeddingInjection,
    pub replaced_src: usize,
    pub replaced_tgt: usize,
    /// Present when adversarial offsets were computed.
    pub adversarial: Option<AdversarialPass>,
}

/// Results of the clean forward/backward pass that produced the adversarial
/// offsets, kept so the training step can reuse them.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialPass {
    pub lambda: f64,
    /// Token-mean NLL of the inputs before offsets.
    pub loss: f64,
    /// Output log-probabilities of those inputs (no gradient attached).
    pub log_probs: Tensor,
    /// Parameter gradients of `loss`.
    pub grads: BTreeMap<String, Tensor>,
}

impl PerturbedBatch {
    pub fn clean(batch: &Batch) -> Self {
        PerturbedBatch {
            src: batch.src.clone(),
            tgt_in: batch.tgt_in.clone(),
            src_injection: EmbeddingInjection::none(),
            tgt_injection: EmbeddingInjection::none(),
            replaced_src: 0,
            replaced_tgt: 0,
            adversarial: None,
        }
    }

    pub fn model_input<'a>(&'a self, batch: &Batch) -> ModelInput<'a> {
        ModelInput {
            batch_size: batch.size,
            src_len: batch.src_len,
            tgt_len: batch.tgt_len,
            src: &self.src,
            tgt_in: &self.tgt_in,
            src_injection: &self.src_injection,
            tgt_injection: &self.tgt_injection,
        }
    }
}

/// Anything that turns a clean batch into a perturbed one at training step `t`.
pub trait Perturber {
    fn perturb<R: Rng + ?Sized>(
        &self,
        batch: &Batch,
        params: &ModelParams,
        t: u64,
        rng: &mut R,
    ) -> Result<PerturbedBatch>;

    /// True when the perturbed batch always equals the clean one.
    fn is_identity(&self) -> bool;
}

impl Perturber for PerturbationStrategy {
    fn perturb<R: Rng + ?Sized>(
        &self,
        batch: &Batch,
        params: &ModelParams,
        t: u64,
        rng: &mut R,
    ) -> Result<PerturbedBatch> {
        apply_strategy(self, batch, params, t, rng)
    }

    fn is_identity(&self) -> bool {
        self.is_none()
    }
}

fn protected(tokens: &[TokenId]) -> Vec<bool> {
    tokens.iter().map(|&t| is_special(t)).collect()
}

fn distribution(
    kind: ReplacementKind,
    side: Side,
    batch: &Batch,
    params: &ModelParams,
) -> Result<ReplacementDistribution> {
    Ok(match kind {
        ReplacementKind::Uniform => ReplacementDistribution::Uniform {
            vocab_size: params.config().vocab_size(side),
        },
        ReplacementKind::Similarity => {
            ReplacementDistribution::Similarity(SimilarityTable::new(params.embeddings(side)))
        }
        ReplacementKind::Scheduled => {
            let mut tape = Tape::no_grad();
            let pv = params.register(&mut tape)?;
            let out = forward_batch(&mut tape, &pv, &ModelInput::clean(batch))?;
            ReplacementDistribution::Scheduled {
                log_probs: tape.value(out.log_probs).clone(),
                tgt_len: batch.tgt_len,
            }
        }
    })
}

/// Applies token replacement, then word dropout, then adversarial offsets,
/// each on its configured side(s). Offsets come from a clean forward and
/// backward pass over the inputs produced by the first two stages.
pub fn apply_strategy<R: Rng + ?Sized>(
    strategy: &PerturbationStrategy,
    batch: &Batch,
    params: &ModelParams,
    t: u64,
    rng: &mut R,
) -> Result<PerturbedBatch> {
    strategy.validate()?;
    let mut out = PerturbedBatch::clean(batch);

    if let Some(rep) = &strategy.replacement {
        let alpha = decay_alpha(&rep.schedule(), t);
        if rep.position.covers(Side::Src) {
            let mut dist = distribution(rep.kind, Side::Src, batch, params)?;
            (out.src, out.replaced_src) = replace_tokens(&batch.src, &mut dist, alpha, rng)?;
        }
        if rep.position.covers(Side::Tgt) {
            let mut dist = distribution(rep.kind, Side::Tgt, batch, params)?;
            (out.tgt_in, out.replaced_tgt) = replace_tokens(&batch.tgt_in, &mut dist, alpha, rng)?;
        }
    }

    if let Some(wd) = &strategy.word_dropout {
        if wd.position.covers(Side::Src) {
            out.src_injection.dropout_mask =
                Some(word_dropout_mask(&protected(&out.src), wd.beta, rng));
        }
        if wd.position.covers(Side::Tgt) {
            out.tgt_injection.dropout_mask =
                Some(word_dropout_mask(&protected(&out.tgt_in), wd.beta, rng));
        }
    }

    if let Some(adv) = &strategy.adversarial {
        let mut tape = Tape::new();
        let pv = params.register(&mut tape)?;
        let fwd = forward_batch(&mut tape, &pv, &out.model_input(batch))?;
        let loss = nll_loss(&mut tape, fwd.log_probs, &batch.tgt_out, &batch.tgt_mask())?;
        let grads = tape.backward(loss)?;
        let offsets = |lookup, tokens: &[TokenId]| {
            let mut r = adversarial_offsets(&grads.get(&tape, lookup), adv.epsilon);
            for (i, &tok) in tokens.iter().enumerate() {
                if is_special(tok) {
                    r.row_mut(i).fill(0.0);
                }
            }
            r
        };
        if adv.position.covers(Side::Src) {
            out.src_injection.offsets = Some(offsets(fwd.src_embed, &out.src));
        }
        if adv.position.covers(Side::Tgt) {
            out.tgt_injection.offsets = Some(offsets(fwd.tgt_embed, &out.tgt_in));
        }
        out.adversarial = Some(AdversarialPass {
            lambda: adv.lambda,
            loss: tape.value(loss).item(),
            log_probs: tape.value(fwd.log_probs).clone(),
            grads: pv
                .iter()
                .map(|(name, v)| (name.to_string(), grads.get(&tape, v)))
                .collect(),
        });
    }
    Ok(out)
}
