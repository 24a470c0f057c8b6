use std::io::BufRead;

use super::{Dataset, Origin, Vocabulary};
use crate::error::{Error, Result};

/// Reads `source<TAB>target` lines of space-separated tokens. Every token
/// must exist in the matching vocabulary; all offenders are reported at once.
pub fn load_tsv<R: BufRead>(
    reader: R,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
) -> Result<Dataset> {
    let mut pairs = Vec::new();
    let mut unknown: Vec<String> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(src), Some(tgt), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse {
                line: i + 1,
                msg: "expected exactly one tab".into(),
            });
        };
        let mut tok = |vocab: &Vocabulary, text: &str| match vocab.tokenize(text) {
            Ok(ids) => ids,
            Err(Error::UnknownTokens(t)) => {
                unknown.extend(t);
                Vec::new()
            }
            Err(_) => Vec::new(),
        };
        let s = tok(src_vocab, src);
        let t = tok(tgt_vocab, tgt);
        if src.split_whitespace().next().is_none() || tgt.split_whitespace().next().is_none() {
            return Err(Error::Parse {
                line: i + 1,
                msg: "empty sequence".into(),
            });
        }
        pairs.push((s, t));
    }
    if !unknown.is_empty() {
        unknown.sort();
        unknown.dedup();
        return Err(Error::UnknownTokens(unknown));
    }
    Ok(Dataset {
        pairs,
        origin: Origin::Corpus,
    })
}
