use std::collections::HashMap;
use std::hash::Hash;

fn ngram_counts<T: Eq + Hash>(seq: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if seq.len() >= n {
        for w in seq.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU with one reference per hypothesis: geometric mean of the
/// clipped 1..=`max_n`-gram precisions times the brevity penalty, without
/// smoothing. Zero when any precision is zero or the corpus is empty.
pub fn bleu<T: Eq + Hash>(hypotheses: &[Vec<T>], references: &[Vec<T>], max_n: usize) -> f64 {
    assert_eq!(
        hypotheses.len(),
        references.len(),
        "one reference per hypothesis"
    );
    let mut matches = vec![0usize; max_n];
    let mut totals = vec![0usize; max_n];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hypotheses.iter().zip(references) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=max_n {
            let rc = ngram_counts(r, n);
            for (g, c) in ngram_counts(h, n) {
                matches[n - 1] += c.min(rc.get(g).copied().unwrap_or(0));
            }
            totals[n - 1] += h.len().saturating_sub(n - 1);
        }
    }
    if max_n == 0 || hyp_len == 0 || matches.contains(&0) {
        return 0.0;
    }
    let log_p: f64 = matches
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| (m as f64 / t as f64).ln())
        .sum::<f64>()
        / max_n as f64;
    let bp = if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    bp * log_p.exp()
}
