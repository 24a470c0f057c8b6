//! Greedy-decoding evaluation: token and sequence accuracy, corpus BLEU, and
//! robustness to corrupted source sentences.

mod bleu;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{corrupt_source, CorruptionMode, Dataset, TokenSequence};
use crate::error::{Error, Result};
use crate::model::{greedy_decode_batch, ModelParams};
use crate::rng::{substream, Stream};

pub use bleu::bleu;

/// Ratios used when none are configured.
pub const DEFAULT_RATIOS: [f64; 4] = [0.0, 0.01, 0.05, 0.10];

const DECODE_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub token_accuracy: f64,
    pub sequence_accuracy: f64,
    pub bleu: f64,
    pub n_examples: usize,
}

/// Corpus-pooled token accuracy (position-wise matches over reference
/// tokens) and exact-match sequence accuracy.
pub fn accuracy<T: PartialEq>(hypotheses: &[Vec<T>], references: &[Vec<T>]) -> Result<(f64, f64)> {
    if hypotheses.len() != references.len() {
        return Err(Error::shape(
            "accuracy",
            format!(
                "{} hypotheses for {} references",
                hypotheses.len(),
                references.len()
            ),
        ));
    }
    if references.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut matched = 0usize;
    let mut total = 0usize;
    let mut exact = 0usize;
    for (h, r) in hypotheses.iter().zip(references) {
        matched += h.iter().zip(r).filter(|(a, b)| a == b).count();
        total += r.len();
        exact += usize::from(h == r);
    }
    let token = if total == 0 {
        0.0
    } else {
        matched as f64 / total as f64
    };
    Ok((token, exact as f64 / references.len() as f64))
}

/// Scores hypotheses against references.
pub fn score(hypotheses: &[TokenSequence], references: &[TokenSequence]) -> Result<EvalResult> {
    let (token_accuracy, sequence_accuracy) = accuracy(hypotheses, references)?;
    Ok(EvalResult {
        token_accuracy,
        sequence_accuracy,
        bleu: bleu(hypotheses, references, 4),
        n_examples: references.len(),
    })
}

/// Greedy-decodes every source in chunks. Output length is capped by the
/// model's maximum length.
pub fn decode_all(params: &ModelParams, sources: &[TokenSequence]) -> Result<Vec<TokenSequence>> {
    let max_len = params.config().max_len - 1;
    let mut out = Vec::with_capacity(sources.len());
    for chunk in sources.chunks(DECODE_CHUNK) {
        out.extend(greedy_decode_batch(params, chunk, max_len)?);
    }
    Ok(out)
}

pub fn evaluate(params: &ModelParams, dataset: &Dataset) -> Result<EvalResult> {
    if dataset.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    score(&decode_all(params, &dataset.sources())?, &dataset.targets())
}

/// Results per corruption ratio, in the order requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessTable {
    pub rows: Vec<(f64, EvalResult)>,
}

impl RobustnessTable {
    pub fn get(&self, ratio: f64) -> Option<&EvalResult> {
        self.rows.iter().find(|(r, _)| *r == ratio).map(|(_, e)| e)
    }

    /// CSV with columns `ratio, token_acc, seq_acc, bleu, n_examples`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["ratio", "token_acc", "seq_acc", "bleu", "n_examples"])?;
        for (ratio, e) in &self.rows {
            w.write_record([
                ratio.to_string(),
                e.token_accuracy.to_string(),
                e.sequence_accuracy.to_string(),
                e.bleu.to_string(),
                e.n_examples.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Corrupts every source at each ratio, decodes, and scores against the
/// untouched references. Example `i` draws its corruption from its own
/// substream of `seed`, so results do not depend on decoding order. A 0.0
/// ratio reproduces plain evaluation; the 0.0 row is added if missing.
pub fn robustness_sweep(
    params: &ModelParams,
    dataset: &Dataset,
    ratios: &[f64],
    mode: CorruptionMode,
    seed: u64,
) -> Result<RobustnessTable> {
    if dataset.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if let Some(r) = ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::Config(format!(
            "corruption ratio {r} is outside [0, 1]"
        )));
    }
    let mut ratios = ratios.to_vec();
    if !ratios.contains(&0.0) {
        ratios.insert(0, 0.0);
    }
    let vocab = params.config().vocab_size_src;
    let sources = dataset.sources();
    let references = dataset.targets();
    let mut rows = Vec::with_capacity(ratios.len());
    for ratio in ratios {
        let corrupted: Vec<TokenSequence> = sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                corrupt_source(
                    s,
                    ratio,
                    vocab,
                    mode,
                    &mut substream(seed, Stream::EvalCorrupt, i as u64),
                )
            })
            .collect();
        rows.push((ratio, score(&decode_all(params, &corrupted)?, &references)?));
    }
    Ok(RobustnessTable { rows })
}
