use std::collections::HashMap;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChrfConfig {
    pub max_ngram: usize,
    pub beta: f64,
    pub effective_order: bool,
    pub remove_whitespace: bool,
}

impl Default for ChrfConfig {
    fn default() -> Self {
        Self { max_ngram: 6, beta: 2.0, effective_order: true, remove_whitespace: true }
    }
}

/// Per-order `[hyp, ref, match]` character n-gram counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChrfStats(pub Vec<[u64; 3]>);

impl ChrfStats {
    pub fn zeros(cfg: &ChrfConfig) -> Self {
        Self(vec![[0; 3]; cfg.max_ngram])
    }

    pub fn add(&mut self, other: &ChrfStats) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for k in 0..3 {
                a[k] += b[k];
            }
        }
    }

    fn is_empty_pair(&self) -> bool {
        self.0.iter().all(|[h, r, _]| *h == 0 && *r == 0)
    }
}

fn ngram_counts(chars: &[char], n: usize) -> HashMap<&[char], u64> {
    let mut map = HashMap::new();
    if chars.len() >= n {
        for w in chars.windows(n) {
            *map.entry(w).or_insert(0) += 1;
        }
    }
    map
}

fn prepare(text: &str, cfg: &ChrfConfig) -> Vec<char> {
    if cfg.remove_whitespace {
        text.chars().filter(|c| !c.is_whitespace()).collect()
    } else {
        text.chars().collect()
    }
}

pub fn chrf_stats(hypothesis: &str, reference: &str, cfg: &ChrfConfig) -> ChrfStats {
    let (h, r) = (prepare(hypothesis, cfg), prepare(reference, cfg));
    ChrfStats(
        (1..=cfg.max_ngram)
            .map(|n| {
                let hc = ngram_counts(&h, n);
                let rc = ngram_counts(&r, n);
                let matches = hc.iter().map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0))).sum();
                [hc.values().sum(), rc.values().sum(), matches]
            })
            .collect(),
    )
}

/// F-score in `[0, 100]` from accumulated counts. Precision and recall are
/// averaged over orders present on both sides, then combined. Two empty
/// strings score 100.
pub fn chrf_from_stats(stats: &ChrfStats, cfg: &ChrfConfig) -> f64 {
    if stats.is_empty_pair() {
        return 100.0;
    }
    let (mut p_sum, mut r_sum, mut orders) = (0.0, 0.0, 0usize);
    for &[h, r, m] in &stats.0 {
        if cfg.effective_order && (h == 0 || r == 0) {
            continue;
        }
        p_sum += if h > 0 { m as f64 / h as f64 } else { 0.0 };
        r_sum += if r > 0 { m as f64 / r as f64 } else { 0.0 };
        orders += 1;
    }
    if orders == 0 {
        return 0.0;
    }
    let (p, r) = (p_sum / orders as f64, r_sum / orders as f64);
    let b2 = cfg.beta * cfg.beta;
    if p + r == 0.0 {
        0.0
    } else {
        100.0 * (1.0 + b2) * p * r / (b2 * p + r)
    }
}

pub fn chrf(hypothesis: &str, reference: &str, cfg: &ChrfConfig) -> f64 {
    chrf_from_stats(&chrf_stats(hypothesis, reference, cfg), cfg)
}

/// Counts are summed over the corpus before scoring.
pub fn corpus_chrf<H: AsRef<str>, R: AsRef<str>>(hyps: &[H], refs: &[R], cfg: &ChrfConfig) -> Result<f64> {
    if hyps.len() != refs.len() {
        return Err(Error::Data(format!("{} hypotheses for {} references", hyps.len(), refs.len())));
    }
    let mut total = ChrfStats::zeros(cfg);
    for (h, r) in hyps.iter().zip(refs) {
        total.add(&chrf_stats(h.as_ref(), r.as_ref(), cfg));
    }
    Ok(chrf_from_stats(&total, cfg))
}
