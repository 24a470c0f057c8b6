use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::autodiff::Tensor;
use crate::data::{is_special, TokenId, TokenSequence, FIRST_REAL};
use crate::error::{Error, Result};

/// `softmax(E_real · e(x))` over real tokens, computed on demand per token.
#[derive(Debug, Clone)]
pub struct SimilarityTable {
    embeddings: Tensor,
    rows: Vec<Option<WeightedIndex<f64>>>,
}

impl SimilarityTable {
    pub fn new(embeddings: &Tensor) -> Self {
        SimilarityTable {
            embeddings: embeddings.clone(),
            rows: vec![None; embeddings.rows()],
        }
    }

    /// Probabilities over all ids for replacing `token`; reserved ids get zero.
    pub fn probabilities(&self, token: TokenId) -> Vec<f64> {
        let e = &self.embeddings;
        let x = e.row(token as usize);
        let first = FIRST_REAL as usize;
        let scores: Vec<f64> = (first..e.rows())
            .map(|j| e.row(j).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exp.iter().sum();
        let mut p = vec![0.0; first];
        p.extend(exp.iter().map(|v| v / z));
        p
    }

    fn sample<R: Rng + ?Sized>(&mut self, token: TokenId, rng: &mut R) -> TokenId {
        if self.rows[token as usize].is_none() {
            let p = self.probabilities(token);
            self.rows[token as usize] = Some(
                WeightedIndex::new(&p[FIRST_REAL as usize..])
                    .expect("softmax weights are positive"),
            );
        }
        let dist = self.rows[token as usize]
            .as_ref()
            .expect("row filled above");
        FIRST_REAL + dist.sample(rng) as TokenId
    }
}

/// Distribution a replaced token is drawn from.
#[derive(Debug, Clone)]
pub enum ReplacementDistribution {
    /// Uniform over the real tokens of a vocabulary of `vocab_size` ids.
    Uniform {
        vocab_size: usize,
    },
    Similarity(SimilarityTable),
    /// Output log-probabilities of one teacher-forced decoder pass,
    /// `(batch * tgt_len, vocab)`. The token at decoder input position `i`
    /// is drawn from output row `i - 1`, renormalized over real tokens.
    Scheduled {
        log_probs: Tensor,
        tgt_len: usize,
    },
}

impl ReplacementDistribution {
    /// Draws a replacement for the real token `clean` found at flat
    /// position `pos` of a row-major token matrix.
    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        clean: TokenId,
        pos: usize,
        rng: &mut R,
    ) -> Result<TokenId> {
        match self {
            ReplacementDistribution::Uniform { vocab_size } => {
                Ok(rng.random_range(FIRST_REAL..*vocab_size as TokenId))
            }
            ReplacementDistribution::Similarity(table) => {
                if clean as usize >= table.embeddings.rows() {
                    return Err(Error::TokenOutOfRange {
                        id: clean,
                        vocab_size: table.embeddings.rows(),
                    });
                }
                Ok(table.sample(clean, rng))
            }
            ReplacementDistribution::Scheduled { log_probs, tgt_len } => {
                if pos % *tgt_len == 0 || pos >= log_probs.rows() {
                    return Err(Error::shape(
                        "scheduled sampling",
                        format!("no prediction for decoder input position {pos}"),
                    ));
                }
                let row = log_probs.row(pos - 1);
                let weights: Vec<f64> =
                    row[FIRST_REAL as usize..].iter().map(|l| l.exp()).collect();
                match WeightedIndex::new(&weights) {
                    Ok(dist) => Ok(FIRST_REAL + dist.sample(rng) as TokenId),
                    // All real-token mass underflowed: nothing to sample from.
                    Err(_) => Ok(clean),
                }
            }
        }
    }
}

/// Keeps each real token with probability `alpha`, otherwise replaces it by
/// a draw from `dist`. Returns the new sequence and the number of positions
/// that were resampled.
pub fn replace_tokens<R: Rng + ?Sized>(
    seq: &[TokenId],
    dist: &mut ReplacementDistribution,
    alpha: f64,
    rng: &mut R,
) -> Result<(TokenSequence, usize)> {
    let mut out = seq.to_vec();
    let mut replaced = 0;
    for (pos, tok) in out.iter_mut().enumerate() {
        if is_special(*tok) {
            continue;
        }
        if rng.random::<f64>() >= alpha {
            *tok = dist.sample(*tok, pos, rng)?;
            replaced += 1;
        }
    }
    Ok((out, replaced))
}

/// Bernoulli(`beta`) keep mask; protected positions are always kept.
pub fn word_dropout_mask<R: Rng + ?Sized>(protected: &[bool], beta: f64, rng: &mut R) -> Vec<f64> {
    protected
        .iter()
        .map(|&p| {
            if p || rng.random::<f64>() < beta {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// `r_i = ε c_i / ||c_i||` row by row; zero rows stay zero.
pub fn adversarial_offsets(grads: &Tensor, epsilon: f64) -> Tensor {
    let mut out = grads.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v *= epsilon / norm);
        }
    }
    out
}
