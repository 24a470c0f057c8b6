use super::forward::{decode, encode, ModelInput};
use super::{EmbeddingInjection, ModelParams};
use crate::autodiff::Tape;
use crate::data::{Batch, TokenId, TokenSequence, BOS, EOS};
use crate::error::{Error, Result};

/// Greedy decoding of one source sequence (without `</s>`). Produces at
/// most `max_len` tokens; the returned sequence excludes `<s>` and `</s>`.
pub fn greedy_decode(
    params: &ModelParams,
    src: &[TokenId],
    max_len: usize,
) -> Result<TokenSequence> {
    let mut out = greedy_decode_batch(params, &[src.to_vec()], max_len)?;
    Ok(out.pop().unwrap_or_default())
}

/// Greedy decoding of several sources at once. Each output depends only
/// on its own source.
pub fn greedy_decode_batch(
    params: &ModelParams,
    sources: &[TokenSequence],
    max_len: usize,
) -> Result<Vec<TokenSequence>> {
    if sources.is_empty() {
        return Ok(Vec::new());
    }
    if sources.iter().any(Vec::is_empty) {
        return Err(Error::EmptySource);
    }
    let cfg = params.config();
    let batch = Batch::from_sources(sources);
    if batch.src_len > cfg.max_len {
        return Err(Error::TooLong {
            len: batch.src_len,
            max_len: cfg.max_len,
        });
    }
    let n = batch.size;
    let mut tape = Tape::no_grad();
    let pv = params.register(&mut tape)?;
    let enc = encode(&mut tape, &pv, &ModelInput::clean(&batch))?;
    let none = EmbeddingInjection::none();

    let steps = (max_len + 1).min(cfg.max_len);
    let mut prefixes: Vec<TokenId> = vec![BOS; n];
    let mut outputs: Vec<TokenSequence> = vec![Vec::new(); n];
    let mut done = vec![false; n];
    for t in 1..=steps {
        let (lp, _) = decode(&mut tape, &pv, &enc, n, batch.src_len, &prefixes, t, &none)?;
        let lp = tape.value(lp);
        let mut next = Vec::with_capacity(n * (t + 1));
        for b in 0..n {
            let row = lp.row(b * t + t - 1);
            // <pad> and <s> are never valid predictions.
            let tok = (EOS as usize..row.len()).fold(EOS as usize, |best, j| {
                if row[j] > row[best] {
                    j
                } else {
                    best
                }
            }) as TokenId;
            if !done[b] {
                if tok == EOS || outputs[b].len() == max_len {
                    done[b] = true;
                } else {
                    outputs[b].push(tok);
                }
            }
            next.extend_from_slice(&prefixes[b * t..(b + 1) * t]);
            next.push(tok);
        }
        prefixes = next;
        if done.iter().all(|&d| d) {
            break;
        }
    }
    Ok(outputs)
}
