use rand::seq::SliceRandom;
use rand::Rng;

use super::{Dataset, TokenId, TokenSequence, BOS, EOS, PAD};

/// Right-padded batch. Sources carry a trailing `</s>`; `tgt_in` is
/// `<s> y_1 .. y_J` and `tgt_out` is `y_1 .. y_J </s>`, so both target
/// matrices share one padding mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub size: usize,
    pub src_len: usize,
    pub tgt_len: usize,
    pub src: Vec<TokenId>,
    pub tgt_in: Vec<TokenId>,
    pub tgt_out: Vec<TokenId>,
}

impl Batch {
    pub fn from_pairs(pairs: &[(TokenSequence, TokenSequence)]) -> Batch {
        assert!(!pairs.is_empty(), "empty batch");
        let size = pairs.len();
        let src_len = pairs.iter().map(|(s, _)| s.len() + 1).max().unwrap_or(1);
        let tgt_len = pairs.iter().map(|(_, t)| t.len() + 1).max().unwrap_or(1);
        let mut src = vec![PAD; size * src_len];
        let mut tgt_in = vec![PAD; size * tgt_len];
        let mut tgt_out = vec![PAD; size * tgt_len];
        for (b, (s, t)) in pairs.iter().enumerate() {
            let row = &mut src[b * src_len..];
            row[..s.len()].copy_from_slice(s);
            row[s.len()] = EOS;
            let row = &mut tgt_in[b * tgt_len..];
            row[0] = BOS;
            row[1..=t.len()].copy_from_slice(t);
            let row = &mut tgt_out[b * tgt_len..];
            row[..t.len()].copy_from_slice(t);
            row[t.len()] = EOS;
        }
        Batch {
            size,
            src_len,
            tgt_len,
            src,
            tgt_in,
            tgt_out,
        }
    }

    /// Batch of sources only, with an empty target; used for decoding.
    pub fn from_sources(sources: &[TokenSequence]) -> Batch {
        let pairs: Vec<_> = sources.iter().map(|s| (s.clone(), Vec::new())).collect();
        Batch::from_pairs(&pairs)
    }

    pub fn src_row(&self, b: usize) -> &[TokenId] {
        &self.src[b * self.src_len..(b + 1) * self.src_len]
    }

    pub fn tgt_in_row(&self, b: usize) -> &[TokenId] {
        &self.tgt_in[b * self.tgt_len..(b + 1) * self.tgt_len]
    }

    pub fn tgt_out_row(&self, b: usize) -> &[TokenId] {
        &self.tgt_out[b * self.tgt_len..(b + 1) * self.tgt_len]
    }

    pub fn src_mask(&self) -> Vec<bool> {
        self.src.iter().map(|&t| t != PAD).collect()
    }

    pub fn tgt_mask(&self) -> Vec<bool> {
        self.tgt_out.iter().map(|&t| t != PAD).collect()
    }

    pub fn real_src_tokens(&self) -> usize {
        self.src.iter().filter(|&&t| t != PAD).count()
    }

    pub fn real_tgt_tokens(&self) -> usize {
        self.tgt_out.iter().filter(|&&t| t != PAD).count()
    }
}

/// One epoch of batches in shuffled order; the last batch may be short.
pub fn make_batches<R: Rng + ?Sized>(
    dataset: &Dataset,
    batch_size: usize,
    shuffle_rng: &mut R,
) -> Vec<Batch> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(shuffle_rng);
    order
        .chunks(batch_size)
        .map(|idx| {
            let pairs: Vec<_> = idx.iter().map(|&i| dataset.pairs[i].clone()).collect();
            Batch::from_pairs(&pairs)
        })
        .collect()
}
