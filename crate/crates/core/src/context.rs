//! Per-turn translation context.
//!
//! A turn at position `i` sees the two turns before it verbatim (with their
//! translations when known) and a summary of at most 200 characters covering
//! every turn before those two.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_segmentation::UnicodeSegmentation;

use crate::backend::{BackendError, ChatBackend, ChatMessage, Purpose};
use crate::corpus::{Conversation, Sender};

/// Number of prior turns passed verbatim.
pub const HISTORY_WINDOW: usize = 2;
/// Summary length bound, in Unicode code points.
pub const SUMMARY_MAX_CHARS: usize = 200;

pub const SUMMARY_SYSTEM: &str = "You write short, factual summaries of customer-support conversations.";
pub const SUMMARY_INSTRUCTION: &str = "Summarize the following customer-support conversation in at most 200 characters, preserving participant intents, named placeholders (e.g. NAME-N), and unresolved issues. Conversation:";
pub const SUMMARY_UPDATE_INSTRUCTION: &str = "Update the summary of the following customer-support conversation with its newest turn, in at most 200 characters, preserving participant intents, named placeholders (e.g. NAME-N), and unresolved issues. Conversation:";

const DIALOGUE_CONTEXT_PREFIX: &str = "Dialogue Context:";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContextError {
    #[error("turn {index} is out of range for a conversation of {len} turns")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("cannot summarize an empty turn list")]
    NothingToSummarize,
    #[error("backend returned an empty summary")]
    EmptySummary,
    #[error(transparent)]
    Backend(#[from] BackendError),
    /// The summarizer failed; `bundle` is the context without a summary.
    #[error("summary unavailable: {reason}")]
    SummaryUnavailable { bundle: Box<ContextBundle>, reason: String },
    #[error("summary cache: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub original: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<String>,
    pub sender: Sender,
}

impl HistoryEntry {
    pub fn new(sender: Sender, original: impl Into<String>, translation: Option<String>) -> Self {
        HistoryEntry { original: original.into(), translation, sender }
    }

    /// `<sender>: <original>`, then the translation on its own line.
    pub fn render(&self) -> String {
        let mut out = format!("{}: {}", self.sender, single_line(&self.original));
        if let Some(t) = self.translation.as_deref().filter(|t| !t.trim().is_empty()) {
            out.push('\n');
            out.push_str(&single_line(t));
        }
        out
    }
}

fn single_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Summary {
    pub text: String,
    pub covered_turns: usize,
}

impl Summary {
    pub fn empty() -> Self {
        Summary::default()
    }

    /// Normalizes backend output into a summary of `covered_turns` turns:
    /// drops a leading "Dialogue Context:" label, folds whitespace, and
    /// truncates to the length bound.
    pub fn from_model_output(raw: &str, covered_turns: usize) -> Result<Self, ContextError> {
        let trimmed = raw.trim();
        let bare = trimmed.strip_prefix(DIALOGUE_CONTEXT_PREFIX).unwrap_or(trimmed);
        let text = truncate_summary(&single_line(bare)).trim_end().to_string();
        if text.is_empty() {
            return Err(ContextError::EmptySummary);
        }
        if covered_turns == 0 {
            return Err(ContextError::NothingToSummarize);
        }
        Ok(Summary { text, covered_turns })
    }

    pub fn is_empty(&self) -> bool {
        self.covered_turns == 0
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ContextBundle {
    /// Most recent last.
    pub history: Vec<HistoryEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
}

impl ContextBundle {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty() && self.summary.is_none()
    }
}

/// Cuts `text` to at most 200 code points without splitting a grapheme
/// cluster. The result is always a prefix of the input.
pub fn truncate_summary(text: &str) -> String {
    truncate_to_chars(text, SUMMARY_MAX_CHARS)
}

pub fn truncate_to_chars(text: &str, max_chars: usize) -> String {
    if text.chars().count() <= max_chars {
        return text.to_string();
    }
    let mut used = 0;
    let mut end = 0;
    for (offset, cluster) in text.grapheme_indices(true) {
        let n = cluster.chars().count();
        if used + n > max_chars {
            break;
        }
        used += n;
        end = offset + cluster.len();
    }
    text[..end].to_string()
}

fn transcript(turns: &[HistoryEntry]) -> String {
    turns.iter().map(HistoryEntry::render).collect::<Vec<_>>().join("\n")
}

/// Asks the backend for a summary of `turns`.
pub fn summarize_turns<B: ChatBackend + ?Sized>(turns: &[HistoryEntry], backend: &B) -> Result<Summary, ContextError> {
    if turns.is_empty() {
        return Err(ContextError::NothingToSummarize);
    }
    let messages = [
        ChatMessage::system(SUMMARY_SYSTEM),
        ChatMessage::user(format!("{SUMMARY_INSTRUCTION}\n{}", transcript(turns))),
    ];
    let result = backend.complete(&messages, Purpose::Summary)?;
    Summary::from_model_output(&result.text, turns.len())
}

/// Folds one more turn into an existing summary.
pub fn update_summary_incremental<B: ChatBackend + ?Sized>(
    previous: &Summary,
    evicted_turn: &HistoryEntry,
    backend: &B,
) -> Result<Summary, ContextError> {
    if previous.is_empty() {
        return summarize_turns(std::slice::from_ref(evicted_turn), backend);
    }
    let messages = [
        ChatMessage::system(SUMMARY_SYSTEM),
        ChatMessage::user(format!(
            "{SUMMARY_UPDATE_INSTRUCTION}\nSummary so far: {}\n{}",
            previous.text,
            evicted_turn.render()
        )),
    ];
    let result = backend.complete(&messages, Purpose::Summary)?;
    Summary::from_model_output(&result.text, previous.covered_turns + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMode {
    /// Summarize each prefix from scratch.
    #[default]
    PerPrefix,
    /// Extend the previous prefix's summary by one turn.
    Incremental,
}

/// Supplies the summary of the turns preceding the history window.
pub trait SummaryProvider: Send + Sync {
    fn summary_for(&self, doc_id: &str, earlier: &[HistoryEntry]) -> Result<Summary, ContextError>;
}

/// One line of the persisted summary cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub doc_id: String,
    pub prefix_length: usize,
    pub text: String,
    pub covered_turns: usize,
}

/// Summaries keyed by `(doc_id, prefix_length)`.
#[derive(Debug, Default)]
pub struct SummaryCache {
    entries: Mutex<HashMap<(String, usize), Summary>>,
}

impl SummaryCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, doc_id: &str, prefix_length: usize) -> Option<Summary> {
        self.lock().get(&(doc_id.to_string(), prefix_length)).cloned()
    }

    pub fn insert(&self, doc_id: &str, prefix_length: usize, summary: Summary) {
        self.lock().insert((doc_id.to_string(), prefix_length), summary);
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<(String, usize), Summary>> {
        self.entries.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Entries sorted by doc id, then prefix length.
    pub fn entries(&self) -> Vec<CacheEntry> {
        let mut out: Vec<CacheEntry> = self
            .lock()
            .iter()
            .map(|((doc_id, prefix_length), s)| CacheEntry {
                doc_id: doc_id.clone(),
                prefix_length: *prefix_length,
                text: s.text.clone(),
                covered_turns: s.covered_turns,
            })
            .collect();
        out.sort_by(|a, b| (&a.doc_id, a.prefix_length).cmp(&(&b.doc_id, b.prefix_length)));
        out
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self, ContextError> {
        let cache = SummaryCache::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| ContextError::Cache(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CacheEntry =
                serde_json::from_str(&line).map_err(|e| ContextError::Cache(format!("line {}: {e}", i + 1)))?;
            if entry.text.chars().count() > SUMMARY_MAX_CHARS || entry.covered_turns != entry.prefix_length {
                return Err(ContextError::Cache(format!("line {}: entry violates summary bounds", i + 1)));
            }
            cache.insert(&entry.doc_id, entry.prefix_length, Summary { text: entry.text, covered_turns: entry.covered_turns });
        }
        Ok(cache)
    }

    pub fn load_path(path: &Path) -> Result<Self, ContextError> {
        let file = std::fs::File::open(path).map_err(|e| ContextError::Cache(format!("{}: {e}", path.display())))?;
        Self::load(std::io::BufReader::new(file))
    }

    pub fn save<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for entry in self.entries() {
            serde_json::to_writer(&mut writer, &entry)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()
    }
}

/// Backend-driven summarizer with a shared cache.
pub struct Summarizer<B> {
    backend: B,
    mode: SummaryMode,
    cache: SummaryCache,
}

impl<B: ChatBackend> Summarizer<B> {
    pub fn new(backend: B, mode: SummaryMode) -> Self {
        Self::with_cache(backend, mode, SummaryCache::new())
    }

    pub fn with_cache(backend: B, mode: SummaryMode, cache: SummaryCache) -> Self {
        Summarizer { backend, mode, cache }
    }

    pub fn cache(&self) -> &SummaryCache {
        &self.cache
    }

    pub fn into_cache(self) -> SummaryCache {
        self.cache
    }

    fn incremental(&self, doc_id: &str, earlier: &[HistoryEntry]) -> Result<Summary, ContextError> {
        // Longest cached prefix, then extend one turn at a time.
        let mut start = earlier.len();
        let mut current = Summary::empty();
        while start > 0 {
            if let Some(s) = self.cache.get(doc_id, start) {
                current = s;
                break;
            }
            start -= 1;
        }
        for (n, entry) in earlier.iter().enumerate().skip(start) {
            current = update_summary_incremental(&current, entry, &self.backend)?;
            self.cache.insert(doc_id, n + 1, current.clone());
        }
        Ok(current)
    }
}

impl<B: ChatBackend> SummaryProvider for Summarizer<B> {
    fn summary_for(&self, doc_id: &str, earlier: &[HistoryEntry]) -> Result<Summary, ContextError> {
        if earlier.is_empty() {
            return Err(ContextError::NothingToSummarize);
        }
        if let Some(hit) = self.cache.get(doc_id, earlier.len()) {
            return Ok(hit);
        }
        match self.mode {
            SummaryMode::PerPrefix => {
                let summary = summarize_turns(earlier, &self.backend)?;
                self.cache.insert(doc_id, earlier.len(), summary.clone());
                Ok(summary)
            }
            SummaryMode::Incremental => self.incremental(doc_id, earlier),
        }
    }
}

/// Builds the context for turn `index` of `conversation`.
///
/// `translation_of` returns the known translation of an earlier turn.
/// When the summarizer fails the bundle is still produced, without a
/// summary, inside [`ContextError::SummaryUnavailable`].
pub fn build_context<F>(
    conversation: &Conversation,
    index: usize,
    translation_of: F,
    summarizer: &dyn SummaryProvider,
) -> Result<ContextBundle, ContextError>
where
    F: Fn(usize) -> Option<String>,
{
    if index >= conversation.len() {
        return Err(ContextError::IndexOutOfRange { index, len: conversation.len() });
    }
    let entries: Vec<HistoryEntry> = conversation.turns[..index]
        .iter()
        .enumerate()
        .map(|(i, t)| HistoryEntry::new(t.sender, t.source.clone(), translation_of(i)))
        .collect();
    bundle_from_entries(&conversation.doc_id, &entries, summarizer)
}

/// Same policy as [`build_context`], over already-built prior entries.
pub fn bundle_from_entries(
    doc_id: &str,
    prior: &[HistoryEntry],
    summarizer: &dyn SummaryProvider,
) -> Result<ContextBundle, ContextError> {
    let split = prior.len().saturating_sub(HISTORY_WINDOW);
    let (earlier, recent) = prior.split_at(split);
    let mut bundle = ContextBundle { history: recent.to_vec(), summary: None };
    if earlier.is_empty() {
        return Ok(bundle);
    }
    match summarizer.summary_for(doc_id, earlier) {
        Ok(summary) => {
            bundle.summary = Some(summary);
            Ok(bundle)
        }
        Err(e) => Err(ContextError::SummaryUnavailable { bundle: Box::new(bundle), reason: e.to_string() }),
    }
}

/// Collapses a `SummaryUnavailable` into its bundle plus a warning.
pub fn bundle_or_warning(result: Result<ContextBundle, ContextError>) -> Result<(ContextBundle, Option<String>), ContextError> {
    match result {
        Ok(bundle) => Ok((bundle, None)),
        Err(ContextError::SummaryUnavailable { bundle, reason }) => Ok((*bundle, Some(reason))),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockBackend;
    use crate::corpus::{assemble_conversations, parse_record};

    fn conversation(n: usize) -> Conversation {
        let rows = (0..n).map(|i| {
            parse_record(
                &serde_json::json!({
                    "source_language": "en", "target_language": "ko",
                    "source": format!("turn {i}"), "doc_id": "doc",
                    "sender": if i % 2 == 0 { "agent" } else { "customer" }
                })
                .to_string(),
                i + 1,
            )
            .unwrap()
        });
        assemble_conversations(rows).pop().unwrap_or(Conversation { doc_id: "doc".into(), turns: vec![] })
    }

    #[test]
    fn first_turn_has_no_context() {
        let s = Summarizer::new(MockBackend::concat(), SummaryMode::PerPrefix);
        let b = build_context(&conversation(3), 0, |_| None, &s).unwrap();
        assert!(b.is_empty());
    }

    #[test]
    fn third_turn_sees_two_turns_and_no_summary() {
        let s = Summarizer::new(MockBackend::concat(), SummaryMode::PerPrefix);
        let b = build_context(&conversation(3), 2, |i| Some(format!("t{i}")), &s).unwrap();
        let originals: Vec<_> = b.history.iter().map(|h| h.original.as_str()).collect();
        assert_eq!(originals, ["turn 0", "turn 1"]);
        assert_eq!(b.history[1].translation.as_deref(), Some("t1"));
        assert!(b.summary.is_none());
    }

    #[test]
    fn sixth_turn_summarizes_the_first_three() {
        let s = Summarizer::new(MockBackend::concat(), SummaryMode::PerPrefix);
        let b = build_context(&conversation(6), 5, |_| None, &s).unwrap();
        let originals: Vec<_> = b.history.iter().map(|h| h.original.as_str()).collect();
        assert_eq!(originals, ["turn 3", "turn 4"]);
        let summary = b.summary.unwrap();
        assert_eq!(summary.covered_turns, 3);
        assert_eq!(summary.text, "turn 0 turn 1 turn 2");
    }

    #[test]
    fn out_of_range_index() {
        let s = Summarizer::new(MockBackend::concat(), SummaryMode::PerPrefix);
        let err = build_context(&conversation(2), 2, |_| None, &s).unwrap_err();
        assert_eq!(err, ContextError::IndexOutOfRange { index: 2, len: 2 });
    }

    #[test]
    fn failing_summarizer_still_yields_history() {
        let s = Summarizer::new(MockBackend::failing(BackendError::Timeout { attempts: 4 }), SummaryMode::PerPrefix);
        let err = build_context(&conversation(5), 4, |_| None, &s).unwrap_err();
        let (bundle, warning) = bundle_or_warning(Err(err)).unwrap();
        assert_eq!(bundle.history.len(), 2);
        assert!(bundle.summary.is_none());
        assert!(warning.unwrap().contains("timed out"));
    }

    #[test]
    fn echo_summary_of_one_turn() {
        let turn = HistoryEntry::new(Sender::Customer, "hello", None);
        let s = summarize_turns(&[turn], &MockBackend::echo()).unwrap();
        assert_eq!(s, Summary { text: "hello".into(), covered_turns: 1 });
    }

    #[test]
    fn overlong_backend_output_is_cut_to_the_bound() {
        let long = "x".repeat(350);
        let mock = MockBackend::from_fn(move |_, _| Ok(long.clone()));
        let turn = HistoryEntry::new(Sender::Agent, "hi", None);
        let s = summarize_turns(&[turn], &mock).unwrap();
        // independent count: bytes equal code points for ASCII
        assert_eq!(s.text.len(), 200);
        assert_eq!(s.text.chars().count(), 200);
    }

    #[test]
    fn blank_backend_output_is_an_error() {
        let mock = MockBackend::from_fn(|_, _| Ok("   ".into()));
        let turn = HistoryEntry::new(Sender::Agent, "hi", None);
        assert_eq!(summarize_turns(&[turn], &mock).unwrap_err(), ContextError::EmptySummary);
        assert_eq!(summarize_turns(&[], &mock).unwrap_err(), ContextError::NothingToSummarize);
    }

    #[test]
    fn dialogue_context_label_is_not_stored() {
        let s = Summary::from_model_output("Dialogue Context: The customer, NAME-N, contacted PRS-ORG.", 2).unwrap();
        assert_eq!(s.text, "The customer, NAME-N, contacted PRS-ORG.");
    }

    #[test]
    fn truncation_keeps_short_text() {
        let text = "가".repeat(150);
        assert_eq!(truncate_summary(&text), text);
    }

    #[test]
    fn truncation_of_ascii() {
        let text: String = (0..250).map(|i| char::from(b'a' + (i % 26) as u8)).collect();
        let out = truncate_summary(&text);
        assert_eq!(out.chars().count(), 200);
        assert!(text.starts_with(&out));
    }

    #[test]
    fn truncation_backs_off_before_a_combining_sequence() {
        // code points 199..=201 form one cluster: e + acute + dot below
        let text = format!("{}e\u{301}\u{323}tail", "a".repeat(198));
        assert_eq!(text.chars().nth(199), Some('\u{301}'));
        let out = truncate_summary(&text);
        assert_eq!(out, "a".repeat(198));

        // cluster ends exactly at 200 -> kept whole
        let text = format!("{}e\u{301}tail", "a".repeat(198));
        assert_eq!(truncate_summary(&text), format!("{}e\u{301}", "a".repeat(198)));
    }

    #[test]
    fn incremental_base_case_matches_full_summary() {
        let turn = HistoryEntry::new(Sender::Customer, "B asked about refunds", None);
        let mock = MockBackend::concat();
        let a = update_summary_incremental(&Summary::empty(), &turn, &mock).unwrap();
        let b = summarize_turns(std::slice::from_ref(&turn), &mock).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn incremental_update_covers_both_topics() {
        let mock = MockBackend::concat();
        let previous = Summary { text: "A was greeted".into(), covered_turns: 1 };
        let evicted = HistoryEntry::new(Sender::Customer, "B asked about refunds", None);
        let updated = update_summary_incremental(&previous, &evicted, &mock).unwrap();
        assert_eq!(updated.covered_turns, 2);
        assert!(updated.char_len() <= SUMMARY_MAX_CHARS);

        let full = summarize_turns(
            &[HistoryEntry::new(Sender::Agent, "A was greeted", None), evicted],
            &mock,
        )
        .unwrap();
        for topic in ["greeted", "refunds"] {
            assert!(updated.text.contains(topic));
            assert!(full.text.contains(topic));
        }
        assert_eq!(full.covered_turns, updated.covered_turns);
    }

    #[test]
    fn incremental_counter_arithmetic() {
        let previous = Summary { text: "s".into(), covered_turns: 3 };
        let evicted = HistoryEntry::new(Sender::Customer, "x", None);
        let updated = update_summary_incremental(&previous, &evicted, &MockBackend::concat()).unwrap();
        assert_eq!(updated.covered_turns, 4);
    }

    #[test]
    fn per_prefix_summaries_are_cached() {
        let mock = std::sync::Arc::new(MockBackend::concat());
        let s = Summarizer::new(mock.clone(), SummaryMode::PerPrefix);
        let conv = conversation(6);
        build_context(&conv, 5, |_| None, &s).unwrap();
        build_context(&conv, 5, |_| None, &s).unwrap();
        assert_eq!(mock.call_count(), 1);
        assert_eq!(s.cache().len(), 1);
    }

    #[test]
    fn incremental_mode_extends_cached_prefixes() {
        let mock = std::sync::Arc::new(MockBackend::concat());
        let s = Summarizer::new(mock.clone(), SummaryMode::Incremental);
        let conv = conversation(8);
        for i in 0..8 {
            let b = build_context(&conv, i, |_| None, &s).unwrap();
            assert_eq!(b.summary.map(|x| x.covered_turns).unwrap_or(0), i.saturating_sub(2));
        }
        // one backend call per evicted turn
        assert_eq!(mock.call_count(), 5);
    }

    #[test]
    fn cache_round_trips_through_jsonl() {
        let cache = SummaryCache::new();
        cache.insert("d1", 2, Summary { text: "two".into(), covered_turns: 2 });
        cache.insert("d0", 1, Summary { text: "one".into(), covered_turns: 1 });
        let mut buf = Vec::new();
        cache.save(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"doc_id":"d0","prefix_length":1,"text":"one","covered_turns":1}"#));
        let loaded = SummaryCache::load(&buf[..]).unwrap();
        assert_eq!(loaded.entries(), cache.entries());
        assert!(SummaryCache::load(&br#"{"doc_id":"d","prefix_length":2,"text":"x","covered_turns":1}"#[..]).is_err());
    }
}
