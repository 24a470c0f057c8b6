use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{is_special, TokenId, TokenSequence, FIRST_REAL};

/// How an evaluation-time corruption ratio is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionMode {
    /// Every real position is replaced independently with probability `ratio`.
    #[default]
    PerPosition,
    /// Exactly `ceil(ratio * real_len)` distinct positions are replaced.
    ExactCount,
}

/// Replaces real tokens of `seq` by uniform draws over the real tokens of a
/// vocabulary of `vocab_size` ids. Reserved ids are left untouched.
pub fn corrupt_source<R: Rng + ?Sized>(
    seq: &[TokenId],
    ratio: f64,
    vocab_size: usize,
    mode: CorruptionMode,
    rng: &mut R,
) -> TokenSequence {
    assert!((0.0..=1.0).contains(&ratio), "ratio must lie in [0, 1]");
    let mut out = seq.to_vec();
    let draw = |rng: &mut R| rng.random_range(FIRST_REAL..vocab_size as TokenId);
    match mode {
        CorruptionMode::PerPosition => {
            for tok in out.iter_mut().filter(|t| !is_special(**t)) {
                if rng.random::<f64>() < ratio {
                    *tok = draw(rng);
                }
            }
        }
        CorruptionMode::ExactCount => {
            let real: Vec<usize> = (0..out.len()).filter(|&i| !is_special(out[i])).collect();
            let n = ((ratio * real.len() as f64).ceil() as usize).min(real.len());
            for k in rand::seq::index::sample(rng, real.len(), n) {
                out[real[k]] = draw(rng);
            }
        }
    }
    out
}
