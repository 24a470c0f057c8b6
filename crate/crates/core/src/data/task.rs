use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{TokenId, TokenSequence, FIRST_REAL};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Copy,
    Reverse,
    Sort,
}

impl TaskKind {
    pub fn target_for(self, source: &[TokenId]) -> TokenSequence {
        match self {
            TaskKind::Copy => source.to_vec(),
            TaskKind::Reverse => source.iter().rev().copied().collect(),
            TaskKind::Sort => {
                let mut t = source.to_vec();
                t.sort();
                t
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Synthetic { kind: TaskKind, seed: u64 },
    Corpus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub pairs: Vec<(TokenSequence, TokenSequence)>,
    pub origin: Origin,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> Vec<TokenSequence> {
        self.pairs.iter().map(|(s, _)| s.clone()).collect()
    }

    pub fn targets(&self) -> Vec<TokenSequence> {
        self.pairs.iter().map(|(_, t)| t.clone()).collect()
    }
}

/// Synthetic pairs: sources are uniform over real tokens with lengths uniform
/// in `len_range` (inclusive); targets follow `kind`.
pub fn generate_task(
    kind: TaskKind,
    n_pairs: usize,
    vocab_size: usize,
    len_range: (usize, usize),
    seed: u64,
) -> Result<Dataset> {
    let (lo, hi) = len_range;
    if lo == 0 || lo > hi {
        return Err(Error::Config(format!("invalid length range {lo}..={hi}")));
    }
    if vocab_size <= FIRST_REAL as usize {
        return Err(Error::Config(format!(
            "vocab_size {vocab_size} has no real tokens"
        )));
    }
    let mut rng = rng::stream(seed, Stream::Data);
    let pairs = (0..n_pairs)
        .map(|_| {
            let len = rng.random_range(lo..=hi);
            let src: TokenSequence = (0..len)
                .map(|_| rng.random_range(FIRST_REAL..vocab_size as TokenId))
                .collect();
            let tgt = kind.target_for(&src);
            (src, tgt)
        })
        .collect();
    Ok(Dataset {
        pairs,
        origin: Origin::Synthetic { kind, seed },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_by_kind() {
        assert_eq!(TaskKind::Copy.target_for(&[5, 7, 2]), vec![5, 7, 2]);
        assert_eq!(TaskKind::Reverse.target_for(&[5, 7, 2]), vec![2, 7, 5]);
        assert_eq!(TaskKind::Sort.target_for(&[7, 5, 7]), vec![5, 7, 7]);
    }

    #[test]
    fn regeneration_is_identical() {
        let a = generate_task(TaskKind::Sort, 200, 32, (4, 10), 99).unwrap();
        let b = generate_task(TaskKind::Sort, 200, 32, (4, 10), 99).unwrap();
        assert_eq!(a, b);
        let c = generate_task(TaskKind::Sort, 200, 32, (4, 10), 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn lengths_and_ids_in_range() {
        let d = generate_task(TaskKind::Copy, 500, 12, (2, 5), 1).unwrap();
        for (s, t) in &d.pairs {
            assert!((2..=5).contains(&s.len()));
            assert!(s.iter().all(|&id| (FIRST_REAL..12).contains(&id)));
            assert_eq!(s, t);
        }
    }

    #[test]
    fn invalid_range_rejected() {
        assert!(generate_task(TaskKind::Copy, 1, 32, (0, 3), 1).is_err());
        assert!(generate_task(TaskKind::Copy, 1, 32, (5, 3), 1).is_err());
        assert!(generate_task(TaskKind::Copy, 1, 3, (1, 3), 1).is_err());
    }
}
