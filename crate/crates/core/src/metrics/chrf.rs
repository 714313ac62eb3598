//! Character n-gram F-score.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChrfConfig {
    pub max_char_order: usize,
    pub beta: f64,
    pub include_whitespace: bool,
}

impl Default for ChrfConfig {
    fn default() -> Self {
        ChrfConfig { max_char_order: 6, beta: 2.0, include_whitespace: false }
    }
}

impl ChrfConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        if self.max_char_order == 0 {
            return Err(MetricError::InvalidConfig("max_char_order must be >= 1".into()));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(MetricError::InvalidConfig("beta must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-order `(hyp n-grams, ref n-grams, matched n-grams)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChrfStats {
    pub orders: Vec<[u64; 3]>,
}

impl ChrfStats {
    pub fn new(max_order: usize) -> Self {
        ChrfStats { orders: vec![[0; 3]; max_order] }
    }

    pub fn sentence(hyp: &str, reference: &str, config: &ChrfConfig) -> Self {
        let keep = |c: &char| config.include_whitespace || !c.is_whitespace();
        let h: Vec<char> = hyp.chars().filter(keep).collect();
        let r: Vec<char> = reference.chars().filter(keep).collect();
        let mut stats = ChrfStats::new(config.max_char_order);
        for n in 1..=config.max_char_order {
            let hyp_counts = char_ngrams(&h, n);
            let ref_counts = char_ngrams(&r, n);
            let matched: u64 = hyp_counts
                .iter()
                .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
            stats.orders[n - 1] = [
                h.len().saturating_sub(n - 1) as u64,
                r.len().saturating_sub(n - 1) as u64,
                matched,
            ];
        }
        stats
    }

    pub fn add(&mut self, other: &ChrfStats) {
        assert_eq!(self.orders.len(), other.orders.len(), "n-gram orders differ");
        for (a, b) in self.orders.iter_mut().zip(&other.orders) {
            for k in 0..3 {
                a[k] += b[k];
            }
        }
    }

    /// Averages precision and recall over the orders where both sides have
    /// n-grams, then combines them with recall weighted by `beta`.
    pub fn score(&self, beta: f64) -> f64 {
        let mut precision = 0.0;
        let mut recall = 0.0;
        let mut effective = 0usize;
        for &[hyp, reference, matched] in &self.orders {
            if hyp > 0 && reference > 0 {
                precision += matched as f64 / hyp as f64;
                recall += matched as f64 / reference as f64;
                effective += 1;
            }
        }
        if effective == 0 {
            return 0.0;
        }
        precision /= effective as f64;
        recall /= effective as f64;
        let b2 = beta * beta;
        let denom = b2 * precision + recall;
        if denom <= 0.0 {
            return 0.0;
        }
        100.0 * (1.0 + b2) * precision * recall / denom
    }
}

fn char_ngrams(chars: &[char], n: usize) -> HashMap<&[char], u64> {
    let mut counts = HashMap::new();
    if chars.len() >= n {
        for g in chars.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

pub fn chrf<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[H], references: &[R], config: &ChrfConfig) -> Result<f64, MetricError> {
    config.validate()?;
    super::check_lengths(hypotheses.len(), references.len())?;
    let mut stats = ChrfStats::new(config.max_char_order);
    for (h, r) in hypotheses.iter().zip(references) {
        stats.add(&ChrfStats::sentence(h.as_ref(), r.as_ref(), config));
    }
    Ok(stats.score(config.beta))
}
