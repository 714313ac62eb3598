//! Simplified discourse-phenomenon taggers and precision/recall/F1.
//!
//! Formality is read off Korean clause-final verb endings. Lexical cohesion
//! marks content words that recur in a later turn of the same document.
//! Both are scored by comparing the tags of a translation with the tags of
//! its reference, produced by the same tagger.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phenomenon {
    Formality,
    LexicalCohesion,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TagSpan {
    pub turn_index: usize,
    pub token_index: usize,
    pub phenomenon: Phenomenon,
    pub value: String,
}

impl TagSpan {
    fn key(&self) -> (usize, Phenomenon, &str) {
        (self.turn_index, self.phenomenon, &self.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        Prf { precision, recall, f1: f1(precision, recall) }
    }
}

/// Harmonic mean of two percentages; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Match counts that can be summed over documents before computing PRF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TagCounts {
    pub matched: usize,
    pub hypothesis: usize,
    pub reference: usize,
}

impl TagCounts {
    /// Multiset match on `(turn_index, phenomenon, value)`.
    pub fn compare(hyp_tags: &[TagSpan], ref_tags: &[TagSpan]) -> Self {
        let mut remaining: HashMap<(usize, Phenomenon, &str), usize> = HashMap::new();
        for t in ref_tags {
            *remaining.entry(t.key()).or_insert(0) += 1;
        }
        let mut matched = 0;
        for t in hyp_tags {
            if let Some(n) = remaining.get_mut(&t.key()).filter(|n| **n > 0) {
                *n -= 1;
                matched += 1;
            }
        }
        TagCounts { matched, hypothesis: hyp_tags.len(), reference: ref_tags.len() }
    }

    pub fn add(&mut self, other: TagCounts) {
        self.matched += other.matched;
        self.hypothesis += other.hypothesis;
        self.reference += other.reference;
    }

    pub fn prf(&self) -> Prf {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
        Prf::new(ratio(self.matched, self.hypothesis), ratio(self.matched, self.reference))
    }
}

pub fn prf_against_reference(hyp_tags: &[TagSpan], ref_tags: &[TagSpan]) -> Prf {
    TagCounts::compare(hyp_tags, ref_tags).prf()
}

const JONGSEONG_BIEUP: u32 = 17;

fn final_consonant(c: char) -> Option<u32> {
    let code = c as u32;
    (0xAC00..=0xD7A3).contains(&code).then(|| (code - 0xAC00) % 28)
}

fn is_clause_punct(c: char) -> bool {
    matches!(c, '.' | '?' | '!' | ',' | ';' | ':' | '…' | '~' | '。' | '？' | '！')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Register {
    Formal,
    Polite,
    Informal,
}

impl Register {
    fn label(self) -> &'static str {
        match self {
            Register::Formal => "formal",
            Register::Polite => "polite",
            Register::Informal => "informal",
        }
    }
}

/// Register signalled by the ending of a Korean word, if any.
fn register_of(word: &str) -> Option<Register> {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    let ends = |suffix: &str| word.ends_with(suffix);
    // -ㅂ니다 / -ㅂ니까: the ㅂ sits in the final slot of the preceding syllable
    let bieup_form = n >= 3
        && (chars[n - 2..] == ['니', '다'] || chars[n - 2..] == ['니', '까'])
        && final_consonant(chars[n - 3]) == Some(JONGSEONG_BIEUP);
    if ends("습니다") || ends("습니까") || ends("십시오") || bieup_form {
        return Some(Register::Formal);
    }
    if ends("요") {
        // -세요, -어요/-아요 and their contracted forms
        return Some(Register::Polite);
    }
    if ends("어") || ends("아") || ends("다") || ends("야") {
        return Some(Register::Informal);
    }
    None
}

fn trim_word(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

/// One span per clause-final word carrying a register marker.
/// `turn_index` is 0; document-level callers overwrite it.
pub fn tag_formality_ko(sentence: &str) -> Vec<TagSpan> {
    let tokens: Vec<&str> = sentence.split_whitespace().collect();
    let mut spans = Vec::new();
    for (i, token) in tokens.iter().enumerate() {
        let word = trim_word(token);
        if word.is_empty() {
            continue;
        }
        let after_word = &token[token.find(word).map(|p| p + word.len()).unwrap_or(token.len())..];
        let clause_final = i + 1 == tokens.len() || after_word.chars().any(is_clause_punct);
        if !clause_final {
            continue;
        }
        if let Some(register) = register_of(word) {
            spans.push(TagSpan {
                turn_index: 0,
                token_index: i,
                phenomenon: Phenomenon::Formality,
                value: register.label().to_string(),
            });
        }
    }
    spans
}

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be", "been", "before",
    "but", "by", "can", "could", "did", "do", "does", "for", "from", "had", "has", "have", "he", "her", "here",
    "him", "his", "how", "i", "if", "in", "into", "is", "it", "its", "just", "me", "may", "my", "no", "not",
    "now", "of", "on", "or", "our", "please", "she", "so", "some", "than", "that", "the", "their", "them",
    "then", "there", "these", "they", "this", "those", "to", "too", "up", "us", "very", "was", "we", "were",
    "what", "when", "where", "which", "who", "will", "with", "would", "you", "your", "yes", "ok", "okay",
    "i'm", "it's", "don't", "can't", "you're", "we're", "thank", "thanks", "hello", "hi",
    "네", "제가", "저는", "그", "이", "저", "것", "수", "등", "및", "그리고", "하지만", "혹시", "감사합니다",
];

fn is_content_word(word: &str) -> bool {
    word.chars().count() >= 2 && word.chars().any(char::is_alphabetic) && !STOPWORDS.contains(&word)
}

/// Tags each occurrence of a content word that already appeared in an
/// earlier turn. `turn_index` is the position in `turns`.
pub fn tag_lexical_cohesion<S: AsRef<str>>(turns: &[S]) -> Vec<TagSpan> {
    let mut seen: HashSet<String> = HashSet::new();
    let mut spans = Vec::new();
    for (turn_index, turn) in turns.iter().enumerate() {
        let mut this_turn = Vec::new();
        for (token_index, token) in turn.as_ref().split_whitespace().enumerate() {
            let word = trim_word(token).to_lowercase();
            if !is_content_word(&word) {
                continue;
            }
            if seen.contains(&word) {
                spans.push(TagSpan {
                    turn_index,
                    token_index,
                    phenomenon: Phenomenon::LexicalCohesion,
                    value: word.clone(),
                });
            }
            this_turn.push(word);
        }
        seen.extend(this_turn);
    }
    spans
}
