use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BleuConfig {
    pub max_n: usize,
    /// add one to matched and total counts for n ≥ 2, so short synthetic
    /// sentences without a 4-gram match do not zero the score
    pub smoothing: bool,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            max_n: 4,
            smoothing: false,
        }
    }
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU with one reference per hypothesis: clipped n-gram counts
/// and lengths are summed over the corpus before taking precisions and the
/// brevity penalty.
pub fn corpus_bleu<T: Eq + Hash>(
    hypotheses: &[Vec<T>],
    references: &[Vec<T>],
    cfg: BleuConfig,
) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::contract(format!(
            "{} hypotheses but {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if cfg.max_n == 0 {
        return Err(Error::contract("max_n must be at least 1"));
    }
    if let Some(i) = references.iter().position(|r| r.is_empty()) {
        return Err(Error::contract(format!("reference {i} is empty")));
    }
    let mut matched = vec![0usize; cfg.max_n];
    let mut total = vec![0usize; cfg.max_n];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (hyp, rf) in hypotheses.iter().zip(references) {
        hyp_len += hyp.len();
        ref_len += rf.len();
        for n in 1..=cfg.max_n {
            let rc = ngram_counts(rf, n);
            for (g, c) in ngram_counts(hyp, n) {
                matched[n - 1] += c.min(rc.get(g).copied().unwrap_or(0));
                total[n - 1] += c;
            }
        }
    }
    if hyp_len == 0 {
        return Ok(0.0);
    }
    let mut log_p = 0.0;
    for n in 0..cfg.max_n {
        let (m, t) = if cfg.smoothing && n > 0 {
            (matched[n] + 1, total[n] + 1)
        } else {
            (matched[n], total[n])
        };
        if m == 0 {
            return Ok(0.0);
        }
        log_p += (m as f64 / t as f64).ln();
    }
    let bp = if hyp_len >= ref_len {
        0.0
    } else {
        1.0 - ref_len as f64 / hyp_len as f64
    };
    Ok((bp + log_p / cfg.max_n as f64).exp())
}
