//! Character-class language check for model outputs.
//!
//! Multilingual models sometimes answer in the wrong language (Turkish,
//! French, Polish, ...). This is not a language identifier: it only tells
//! Hangul text, plain-ASCII Latin text and accented Latin text apart.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::LanguageCode;

pub const KOREAN_THRESHOLD: f64 = 0.5;
pub const LATIN_HANGUL_CEILING: f64 = 0.05;
pub const NON_ENGLISH_THRESHOLD: f64 = 0.05;
/// Share of letters that must be Latin before a Latin label is given.
pub const LATIN_MAJORITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageLabel {
    Korean,
    LatinEnglishLike,
    LatinNonEnglish,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanguageGuess {
    pub label: LanguageLabel,
    pub hangul_ratio: f64,
    pub non_english_letter_ratio: f64,
}

impl LanguageGuess {
    /// Whether the label is what a translation into `expected` should get.
    /// Only `ko` and `en` are checked; other targets always match.
    pub fn matches(&self, expected: &LanguageCode) -> bool {
        match expected.as_str() {
            "ko" => self.label == LanguageLabel::Korean,
            "en" => self.label == LanguageLabel::LatinEnglishLike,
            _ => true,
        }
    }
}

pub fn is_hangul(c: char) -> bool {
    matches!(c,
        '\u{AC00}'..='\u{D7A3}'
        | '\u{1100}'..='\u{11FF}'
        | '\u{3130}'..='\u{318F}'
        | '\u{A960}'..='\u{A97F}'
        | '\u{D7B0}'..='\u{D7FF}'
        | '\u{FFA0}'..='\u{FFDC}')
}

fn is_latin(c: char) -> bool {
    c.is_ascii_alphabetic()
        || matches!(c,
            '\u{00C0}'..='\u{024F}'
            | '\u{0250}'..='\u{02AF}'
            | '\u{1E00}'..='\u{1EFF}'
            | '\u{2C60}'..='\u{2C7F}'
            | '\u{A720}'..='\u{A7FF}'
            | '\u{AB30}'..='\u{AB6F}'
            | '\u{FB00}'..='\u{FB06}'
            | '\u{FF21}'..='\u{FF3A}'
            | '\u{FF41}'..='\u{FF5A}')
}

#[derive(Debug, Clone, Default)]
pub struct LanguageDetector {
    /// Non-ASCII Latin letters that still count as English (e.g. `é` for "café").
    allowlist: BTreeSet<char>,
}

impl LanguageDetector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_allowlist(chars: impl IntoIterator<Item = char>) -> Self {
        LanguageDetector { allowlist: chars.into_iter().collect() }
    }

    pub fn detect(&self, text: &str) -> LanguageGuess {
        let mut letters = 0usize;
        let mut hangul = 0usize;
        let mut latin = 0usize;
        let mut non_english = 0usize;
        for c in text.chars().filter(|c| c.is_alphabetic()) {
            letters += 1;
            if is_hangul(c) {
                hangul += 1;
            } else if is_latin(c) {
                latin += 1;
                if !c.is_ascii_alphabetic() && !self.allowlist.contains(&c) {
                    non_english += 1;
                }
            }
        }
        if letters == 0 {
            return LanguageGuess {
                label: LanguageLabel::Other,
                hangul_ratio: 0.0,
                non_english_letter_ratio: 0.0,
            };
        }
        let total = letters as f64;
        let hangul_ratio = hangul as f64 / total;
        let non_english_letter_ratio = non_english as f64 / total;
        let latin_ratio = latin as f64 / total;
        LanguageGuess {
            label: classify(hangul_ratio, non_english_letter_ratio, latin_ratio),
            hangul_ratio,
            non_english_letter_ratio,
        }
    }
}

fn classify(hangul_ratio: f64, non_english_ratio: f64, latin_ratio: f64) -> LanguageLabel {
    if hangul_ratio >= KOREAN_THRESHOLD {
        LanguageLabel::Korean
    } else if hangul_ratio < LATIN_HANGUL_CEILING && latin_ratio >= LATIN_MAJORITY {
        if non_english_ratio >= NON_ENGLISH_THRESHOLD {
            LanguageLabel::LatinNonEnglish
        } else {
            LanguageLabel::LatinEnglishLike
        }
    } else {
        LanguageLabel::Other
    }
}

pub fn detect_language(text: &str) -> LanguageGuess {
    LanguageDetector::default().detect(text)
}
