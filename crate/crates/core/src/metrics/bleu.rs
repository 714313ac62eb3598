//! Corpus BLEU with clipped n-gram precision and a brevity penalty.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::corpus::LanguageCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    #[default]
    None,
    /// An order with no matches gets precision 1 / (total + 1).
    AddOneOnZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Tokenizer {
    #[default]
    Whitespace,
    /// Every non-space character is a token. Used for Korean targets.
    CharForKorean,
}

impl Tokenizer {
    pub fn for_target(language: &LanguageCode) -> Self {
        if language.is_korean() {
            Tokenizer::CharForKorean
        } else {
            Tokenizer::Whitespace
        }
    }

    pub fn tokenize<'a>(&self, text: &'a str) -> Vec<&'a str> {
        match self {
            Tokenizer::Whitespace => text.split_whitespace().collect(),
            Tokenizer::CharForKorean => text
                .char_indices()
                .filter(|(_, c)| !c.is_whitespace())
                .map(|(i, c)| &text[i..i + c.len_utf8()])
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub max_ngram_order: usize,
    pub smoothing: Smoothing,
    pub tokenizer: Tokenizer,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig { max_ngram_order: 4, smoothing: Smoothing::None, tokenizer: Tokenizer::Whitespace }
    }
}

impl BleuConfig {
    pub fn for_target(language: &LanguageCode) -> Self {
        BleuConfig { tokenizer: Tokenizer::for_target(language), ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if self.max_ngram_order == 0 {
            return Err(MetricError::InvalidConfig("max_ngram_order must be >= 1".into()));
        }
        Ok(())
    }
}

/// Sufficient statistics; summing them over sentences gives corpus BLEU.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub matches: Vec<u64>,
    pub totals: Vec<u64>,
    pub hyp_len: u64,
    pub ref_len: u64,
}

fn ngram_counts<'t, 'a>(tokens: &'t [&'a str], n: usize) -> HashMap<&'t [&'a str], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

impl BleuStats {
    pub fn new(max_order: usize) -> Self {
        BleuStats { matches: vec![0; max_order], totals: vec![0; max_order], hyp_len: 0, ref_len: 0 }
    }

    pub fn from_tokens(hyp: &[&str], reference: &[&str], max_order: usize) -> Self {
        let mut stats = BleuStats::new(max_order);
        stats.hyp_len = hyp.len() as u64;
        stats.ref_len = reference.len() as u64;
        for n in 1..=max_order {
            let hyp_counts = ngram_counts(hyp, n);
            let ref_counts = ngram_counts(reference, n);
            stats.totals[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
            stats.matches[n - 1] = hyp_counts
                .iter()
                .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
                .sum();
        }
        stats
    }

    pub fn sentence(hyp: &str, reference: &str, config: &BleuConfig) -> Self {
        let h = config.tokenizer.tokenize(hyp);
        let r = config.tokenizer.tokenize(reference);
        Self::from_tokens(&h, &r, config.max_ngram_order)
    }

    pub fn add(&mut self, other: &BleuStats) {
        assert_eq!(self.totals.len(), other.totals.len(), "n-gram orders differ");
        for n in 0..self.totals.len() {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// BLEU in [0, 100]. Orders for which the hypothesis side has no n-grams
    /// at all are left out of the geometric mean.
    pub fn score(&self, smoothing: Smoothing) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut orders = 0usize;
        for (&m, &t) in self.matches.iter().zip(&self.totals) {
            if t == 0 {
                continue;
            }
            let p = if m == 0 {
                match smoothing {
                    Smoothing::None => return 0.0,
                    Smoothing::AddOneOnZero => 1.0 / (t as f64 + 1.0),
                }
            } else {
                m as f64 / t as f64
            };
            log_sum += p.ln();
            orders += 1;
        }
        let bp = if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        };
        100.0 * bp * (log_sum / orders as f64).exp()
    }
}

pub fn bleu<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[H], references: &[R], config: &BleuConfig) -> Result<f64, MetricError> {
    config.validate()?;
    super::check_lengths(hypotheses.len(), references.len())?;
    let mut stats = BleuStats::new(config.max_ngram_order);
    for (h, r) in hypotheses.iter().zip(references) {
        stats.add(&BleuStats::sentence(h.as_ref(), r.as_ref(), config));
    }
    Ok(stats.score(config.smoothing))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(n: usize) -> BleuConfig {
        BleuConfig { max_ngram_order: n, ..Default::default() }
    }

    #[test]
    fn identity_is_one_hundred() {
        let corpus = ["the cat sat on the mat", "a", "password reset email"];
        assert_eq!(bleu(&corpus, &corpus, &BleuConfig::default()).unwrap(), 100.0);
    }

    #[test]
    fn clipped_unigram_precision() {
        let score = bleu(&["the the the"], &["the cat"], &order(1)).unwrap();
        assert!((score - 100.0 / 3.0).abs() < 1e-12, "{score}");
    }

    #[test]
    fn no_shared_four_gram_is_zero() {
        let score = bleu(&["the cat sat on the mat"], &["the cat is on the mat"], &order(4)).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn smoothing_rescues_zero_orders() {
        let config = BleuConfig { smoothing: Smoothing::AddOneOnZero, ..order(4) };
        let score = bleu(&["the cat sat on the mat"], &["the cat is on the mat"], &config).unwrap();
        assert!(score > 0.0 && score < 100.0);
    }

    #[test]
    fn brevity_penalty() {
        // one unigram match out of one, reference twice as long
        let score = bleu(&["cat"], &["the cat"], &order(1)).unwrap();
        assert!((score - 100.0 * (1.0f64 - 2.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn empty_hypothesis_scores_zero() {
        assert_eq!(bleu(&[""], &["the cat"], &order(4)).unwrap(), 0.0);
    }

    #[test]
    fn korean_targets_use_characters() {
        let config = BleuConfig::for_target(&LanguageCode::ko());
        assert_eq!(config.tokenizer.tokenize("맞습니까 ?"), ["맞", "습", "니", "까", "?"]);
        let score = bleu(&["비밀번호 재설정"], &["비밀번호를 재설정"], &config).unwrap();
        assert!(score > 0.0 && score < 100.0);
    }

    #[test]
    fn errors() {
        assert_eq!(bleu::<&str, &str>(&[], &[], &order(4)).unwrap_err(), MetricError::EmptyCorpus);
        assert!(matches!(bleu(&["a"], &["a", "b"], &order(4)), Err(MetricError::LengthMismatch { .. })));
        assert!(matches!(bleu(&["a"], &["a"], &order(0)), Err(MetricError::InvalidConfig(_))));
    }
}
