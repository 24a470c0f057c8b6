//! Losses, the Adam optimizer, the training step and throughput accounting.

mod loss;
mod optim;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor};
use crate::data::{make_batches, Batch, Dataset};
use crate::error::{Error, Result};
use crate::model::{forward_batch, ModelParams};
use crate::perturb::Perturber;

pub use loss::{nll_loss, nll_value, vat_loss};
pub use optim::{adam_update, clip_global_norm, OptimizerConfig, OptimizerState};

/// Steps at the start of a window left out of throughput figures.
pub const WARMUP_STEPS: usize = 10;

/// Losses of one step. `clean` is the NLL of the unperturbed inputs when
/// the step computed it; `vat` is present for adversarial strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub clean: Option<f64>,
    pub perturbed: f64,
    pub vat: Option<f64>,
    pub objective: f64,
    pub token_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    pub seconds: f64,
    /// Real source plus target tokens.
    pub tokens: usize,
    pub loss: LossReport,
    pub replaced_src: usize,
    pub replaced_tgt: usize,
}

/// Parameters and optimizer state of one run.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: ModelParams,
    pub optimizer: OptimizerState,
    pub config: OptimizerConfig,
    /// Number of completed steps.
    pub step: u64,
}

impl TrainState {
    pub fn new(params: ModelParams, config: OptimizerConfig) -> Self {
        TrainState {
            optimizer: OptimizerState::new(&params),
            params,
            config,
            step: 0,
        }
    }
}

fn param_grads(
    tape: &Tape,
    pv: &crate::model::ParamVars,
    grads: &crate::autodiff::Gradients,
) -> BTreeMap<String, Tensor> {
    pv.iter()
        .map(|(name, v)| (name.to_string(), grads.get(tape, v)))
        .collect()
}

/// One optimization step: perturb, forward, loss, backward, clip, Adam.
/// The reported time covers all of these.
pub fn train_step<P: Perturber + ?Sized, R: Rng + ?Sized>(
    state: &mut TrainState,
    batch: &Batch,
    perturber: &P,
    rng: &mut R,
) -> Result<StepMetrics> {
    let start = Instant::now();
    let pb = perturber.perturb(batch, &state.params, state.step, rng)?;
    let mask = batch.tgt_mask();
    let token_count = batch.real_tgt_tokens();

    let mut tape = Tape::new();
    let pv = state.params.register(&mut tape)?;
    let out = forward_batch(&mut tape, &pv, &pb.model_input(batch))?;
    let (report, mut grads) = match &pb.adversarial {
        None => {
            let loss = nll_loss(&mut tape, out.log_probs, &batch.tgt_out, &mask)?;
            let l = tape.value(loss).item();
            let g = tape.backward(loss)?;
            let report = LossReport {
                clean: perturber.is_identity().then_some(l),
                perturbed: l,
                vat: None,
                objective: l,
                token_count,
            };
            (report, param_grads(&tape, &pv, &g))
        }
        Some(adv) => {
            let a = vat_loss(&mut tape, &adv.log_probs, out.log_probs, &mask)?;
            let a_val = tape.value(a).item();
            let g = tape.backward(a)?;
            let mut total = adv.grads.clone();
            for (name, v) in pv.iter() {
                if let (Some(dst), Some(src)) = (total.get_mut(name), g.get_ref(v)) {
                    for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                        *d += adv.lambda * s;
                    }
                }
            }
            let report = LossReport {
                clean: Some(adv.loss),
                perturbed: nll_value(tape.value(out.log_probs), &batch.tgt_out, &mask)?,
                vat: Some(a_val),
                objective: adv.loss + adv.lambda * a_val,
                token_count,
            };
            (report, total)
        }
    };
    if !report.objective.is_finite() {
        return Err(Error::NonFinite { op: "objective" });
    }

    clip_global_norm(&mut grads, state.config.clip_norm);
    let lr = state.config.learning_rate(state.step);
    adam_update(
        &mut state.params,
        &grads,
        &mut state.optimizer,
        &state.config,
        lr,
    )?;
    let seconds = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);

    let metrics = StepMetrics {
        step: state.step,
        seconds,
        tokens: batch.real_src_tokens() + token_count,
        loss: report,
        replaced_src: pb.replaced_src,
        replaced_tgt: pb.replaced_tgt,
    };
    state.step += 1;
    Ok(metrics)
}

/// Median per-step tokens per second over `metrics`, skipping the first
/// [`WARMUP_STEPS`]. The median keeps one stalled step (a page fault, a
/// descheduled thread) from moving the figure.
pub fn throughput(metrics: &[StepMetrics]) -> Result<f64> {
    let window = metrics.get(WARMUP_STEPS..).unwrap_or(&[]);
    if window.is_empty() {
        return Err(Error::WindowTooShort);
    }
    let mut rates: Vec<f64> = window.iter().map(|m| m.tokens as f64 / m.seconds).collect();
    rates.sort_by(f64::total_cmp);
    let mid = rates.len() / 2;
    Ok(if rates.len() % 2 == 1 {
        rates[mid]
    } else {
        0.5 * (rates[mid - 1] + rates[mid])
    })
}

/// Endless batch iterator: reshuffles the dataset at every epoch boundary.
pub struct BatchStream<'a, R> {
    dataset: &'a Dataset,
    batch_size: usize,
    rng: R,
    pending: std::vec::IntoIter<Batch>,
}

impl<'a, R: Rng> BatchStream<'a, R> {
    pub fn new(dataset: &'a Dataset, batch_size: usize, shuffle_rng: R) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(BatchStream {
            dataset,
            batch_size,
            rng: shuffle_rng,
            pending: Vec::new().into_iter(),
        })
    }
}

impl<R: Rng> Iterator for BatchStream<'_, R> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if let Some(b) = self.pending.next() {
            return Some(b);
        }
        self.pending = make_batches(self.dataset, self.batch_size, &mut self.rng).into_iter();
        self.pending.next()
    }
}
