//! Ingestion of chat-translation JSONL files.
//!
//! Each line is one utterance of a customer-support conversation. Rows are
//! grouped into [`Conversation`]s by `doc_id`, keeping encounter order, and
//! every row is given a `turn_index` relative to its conversation.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("line {line}: malformed JSON: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: field `{field}` has an invalid value: {message}")]
    InvalidField {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("line {line}: source and target language are both `{language}`")]
    BadLanguagePair { line: usize, language: String },
    #[error("line {line}: `source` is empty")]
    EmptySource { line: usize },
    #[error("i/o error: {0}")]
    Io(String),
}

impl CorpusError {
    /// The field named by a `MissingField`, if that is what this is.
    pub fn missing_field(&self) -> Option<&'static str> {
        match self {
            CorpusError::MissingField { field, .. } => Some(field),
            _ => None,
        }
    }
}

/// A lowercase language code such as `ko` or `en`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LanguageCode(String);

impl LanguageCode {
    pub fn new(code: impl AsRef<str>) -> Self {
        LanguageCode(code.as_ref().trim().to_ascii_lowercase())
    }

    pub fn ko() -> Self {
        LanguageCode::new("ko")
    }

    pub fn en() -> Self {
        LanguageCode::new("en")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_korean(&self) -> bool {
        self.0 == "ko"
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Translation direction, rendered as `ko-en`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Direction {
    pub source: LanguageCode,
    pub target: LanguageCode,
}

impl Direction {
    pub fn new(source: LanguageCode, target: LanguageCode) -> Self {
        Direction { source, target }
    }

    pub fn ko_en() -> Self {
        Direction::new(LanguageCode::ko(), LanguageCode::en())
    }

    pub fn en_ko() -> Self {
        Direction::new(LanguageCode::en(), LanguageCode::ko())
    }

    /// Display form used in tables: `en→ko`.
    pub fn arrow(&self) -> String {
        format!("{}→{}", self.source, self.target)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.source, self.target)
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (src, tgt) = s
            .split_once(['-', '>', '→'])
            .ok_or_else(|| format!("expected a direction like `ko-en`, got `{s}`"))?;
        let src = src.trim_end_matches('-');
        let tgt = tgt.trim_start_matches('>');
        if src.is_empty() || tgt.is_empty() {
            return Err(format!("expected a direction like `ko-en`, got `{s}`"));
        }
        Ok(Direction::new(LanguageCode::new(src), LanguageCode::new(tgt)))
    }
}

impl Serialize for Direction {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Direction {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sender {
    Customer,
    Agent,
}

impl Sender {
    pub fn as_str(self) -> &'static str {
        match self {
            Sender::Customer => "customer",
            Sender::Agent => "agent",
        }
    }
}

impl fmt::Display for Sender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Sender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "customer" => Ok(Sender::Customer),
            "agent" => Ok(Sender::Agent),
            other => Err(format!("unknown sender `{other}`")),
        }
    }
}

/// One dataset row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRecord {
    pub source_language: LanguageCode,
    pub target_language: LanguageCode,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_id: Option<String>,
    pub sender: Sender,
    #[serde(default)]
    pub turn_index: usize,
    /// Fields this crate does not interpret, kept for round-tripping.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl ChatRecord {
    pub fn direction(&self) -> Direction {
        Direction::new(self.source_language.clone(), self.target_language.clone())
    }
}

const KNOWN_FIELDS: [&str; 8] = [
    "source_language",
    "target_language",
    "source",
    "reference",
    "doc_id",
    "client_id",
    "sender",
    "turn_index",
];

fn take_string(
    obj: &mut Map<String, Value>,
    field: &'static str,
    line: usize,
) -> Result<Option<String>, CorpusError> {
    match obj.remove(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        // Some exports write numeric ids.
        Some(Value::Number(n)) => Ok(Some(n.to_string())),
        Some(other) => Err(CorpusError::InvalidField {
            line,
            field,
            message: format!("expected a string, found {other}"),
        }),
    }
}

fn require_string(
    obj: &mut Map<String, Value>,
    field: &'static str,
    line: usize,
) -> Result<String, CorpusError> {
    take_string(obj, field, line)?.ok_or(CorpusError::MissingField { line, field })
}

/// Parses one JSONL line. `line_number` is 1-based and only used in errors.
pub fn parse_record(line: &str, line_number: usize) -> Result<ChatRecord, CorpusError> {
    let value: Value = serde_json::from_str(line).map_err(|e| CorpusError::MalformedLine {
        line: line_number,
        message: e.to_string(),
    })?;
    let Value::Object(mut obj) = value else {
        return Err(CorpusError::MalformedLine {
            line: line_number,
            message: "expected a JSON object".into(),
        });
    };

    let source_language = LanguageCode::new(require_string(&mut obj, "source_language", line_number)?);
    let target_language = LanguageCode::new(require_string(&mut obj, "target_language", line_number)?);
    let source = require_string(&mut obj, "source", line_number)?;
    let doc_id = require_string(&mut obj, "doc_id", line_number)?;
    let sender_raw = require_string(&mut obj, "sender", line_number)?;
    let reference = take_string(&mut obj, "reference", line_number)?;
    let client_id = take_string(&mut obj, "client_id", line_number)?;

    let turn_index = match obj.remove("turn_index") {
        None | Some(Value::Null) => 0,
        Some(Value::Number(n)) => n.as_u64().ok_or_else(|| CorpusError::InvalidField {
            line: line_number,
            field: "turn_index",
            message: format!("expected a non-negative integer, found {n}"),
        })? as usize,
        Some(other) => {
            return Err(CorpusError::InvalidField {
                line: line_number,
                field: "turn_index",
                message: format!("expected a non-negative integer, found {other}"),
            })
        }
    };

    if source_language.as_str().is_empty() {
        return Err(CorpusError::InvalidField {
            line: line_number,
            field: "source_language",
            message: "empty language code".into(),
        });
    }
    if target_language.as_str().is_empty() {
        return Err(CorpusError::InvalidField {
            line: line_number,
            field: "target_language",
            message: "empty language code".into(),
        });
    }
    if source_language == target_language {
        return Err(CorpusError::BadLanguagePair {
            line: line_number,
            language: source_language.to_string(),
        });
    }
    if source.trim().is_empty() {
        return Err(CorpusError::EmptySource { line: line_number });
    }
    let sender = sender_raw
        .parse::<Sender>()
        .map_err(|message| CorpusError::InvalidField {
            line: line_number,
            field: "sender",
            message,
        })?;

    debug_assert!(KNOWN_FIELDS.iter().all(|f| !obj.contains_key(*f)));
    Ok(ChatRecord {
        source_language,
        target_language,
        source,
        reference,
        doc_id,
        client_id,
        sender,
        turn_index,
        extra: obj,
    })
}

/// Reads every non-blank line of a JSONL stream, stopping at the first error.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<ChatRecord>, CorpusError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_record(&line, i + 1)?);
    }
    Ok(records)
}

pub fn read_records_from_path(path: &std::path::Path) -> Result<Vec<ChatRecord>, CorpusError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CorpusError::Io(format!("{}: {e}", path.display())))?;
    read_records(std::io::BufReader::new(file))
}

pub fn write_records<'a, W: Write>(
    mut writer: W,
    records: impl IntoIterator<Item = &'a ChatRecord>,
) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// All rows sharing one `doc_id`, in turn order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub doc_id: String,
    pub turns: Vec<ChatRecord>,
}

impl Conversation {
    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }
}

/// Stable group-by on `doc_id`. Conversations come out in order of first
/// appearance and each turn gets `turn_index` = its position.
pub fn assemble_conversations(records: impl IntoIterator<Item = ChatRecord>) -> Vec<Conversation> {
    let mut groups: IndexMap<String, Vec<ChatRecord>> = IndexMap::new();
    for record in records {
        groups.entry(record.doc_id.clone()).or_default().push(record);
    }
    groups
        .into_iter()
        .map(|(doc_id, mut turns)| {
            for (i, turn) in turns.iter_mut().enumerate() {
                turn.turn_index = i;
            }
            Conversation { doc_id, turns }
        })
        .collect()
}

/// Flattens conversations back into rows, conversation by conversation.
pub fn flatten(conversations: &[Conversation]) -> impl Iterator<Item = &ChatRecord> {
    conversations.iter().flat_map(|c| c.turns.iter())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub split_name: String,
    pub record_count: usize,
    pub conversation_count: usize,
    pub direction_counts: BTreeMap<String, usize>,
}

impl fmt::Display for SplitStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "split={} records={} conversations={}",
            self.split_name, self.record_count, self.conversation_count
        )?;
        for (direction, count) in &self.direction_counts {
            write!(f, " {direction}={count}")?;
        }
        Ok(())
    }
}

pub fn split_stats(conversations: &[Conversation], split_name: &str) -> SplitStats {
    let mut direction_counts = BTreeMap::new();
    for record in flatten(conversations) {
        *direction_counts.entry(record.direction().to_string()).or_insert(0) += 1;
    }
    SplitStats {
        split_name: split_name.to_string(),
        record_count: conversations.iter().map(Conversation::len).sum(),
        conversation_count: conversations.len(),
        direction_counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE_ONE: &str = r#"{"source_language": "ko", "target_language": "en", "source": "비밀번호 재설정 메일이 도착하지 않습니다.", "reference": "I don't receive a password reset email.", "doc_id": "64619c16ab8523e90010b544", "client_id": "0015800001EMz0vAAD", "sender": "customer"}"#;

    fn row(doc: &str, text: &str) -> ChatRecord {
        parse_record(
            &serde_json::json!({
                "source_language": "en", "target_language": "ko",
                "source": text, "doc_id": doc, "sender": "agent"
            })
            .to_string(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn parses_the_published_example_row() {
        let r = parse_record(EXAMPLE_ONE, 1).unwrap();
        assert_eq!(r.source_language, LanguageCode::ko());
        assert_eq!(r.target_language, LanguageCode::en());
        assert_eq!(r.source, "비밀번호 재설정 메일이 도착하지 않습니다.");
        assert_eq!(r.sender, Sender::Customer);
        assert_eq!(r.reference.as_deref(), Some("I don't receive a password reset email."));
        assert_eq!(r.client_id.as_deref(), Some("0015800001EMz0vAAD"));
        assert!(r.extra.is_empty());
    }

    #[test]
    fn missing_source_is_named() {
        let err = parse_record(
            r#"{"source_language":"ko","target_language":"en","doc_id":"d","sender":"agent"}"#,
            7,
        )
        .unwrap_err();
        assert_eq!(err, CorpusError::MissingField { line: 7, field: "source" });
    }

    #[test]
    fn same_language_pair_is_rejected() {
        let err = parse_record(
            r#"{"source_language":"en","target_language":"en","source":"hi","doc_id":"d","sender":"agent"}"#,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::BadLanguagePair { .. }));
    }

    #[test]
    fn blank_source_and_bad_sender_are_rejected() {
        let blank = parse_record(
            r#"{"source_language":"en","target_language":"ko","source":"   ","doc_id":"d","sender":"agent"}"#,
            1,
        );
        assert!(matches!(blank, Err(CorpusError::EmptySource { .. })));
        let bot = parse_record(
            r#"{"source_language":"en","target_language":"ko","source":"x","doc_id":"d","sender":"bot"}"#,
            1,
        );
        assert!(matches!(bot, Err(CorpusError::InvalidField { field: "sender", .. })));
        assert!(matches!(parse_record("[1,2]", 1), Err(CorpusError::MalformedLine { .. })));
        assert!(matches!(parse_record("{", 1), Err(CorpusError::MalformedLine { .. })));
    }

    #[test]
    fn missing_reference_is_accepted() {
        let r = row("d", "hello");
        assert!(r.reference.is_none());
    }

    #[test]
    fn unknown_fields_survive_a_round_trip() {
        let line = r#"{"source_language":"en","target_language":"ko","source":"hi","doc_id":"d","sender":"agent","mt_system":"x","score":0.5}"#;
        let r = parse_record(line, 1).unwrap();
        assert_eq!(r.extra.get("mt_system"), Some(&Value::from("x")));
        let written = serde_json::to_string(&r).unwrap();
        let back = parse_record(&written, 1).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn grouping_by_doc_id() {
        let convs = assemble_conversations(vec![row("A", "1"), row("A", "2"), row("B", "3")]);
        assert_eq!(convs.len(), 2);
        assert_eq!(convs[0].len(), 2);
        assert_eq!(convs[1].len(), 1);
        assert!(assemble_conversations(Vec::new()).is_empty());
    }

    #[test]
    fn interleaved_rows_keep_encounter_order() {
        let convs = assemble_conversations(vec![row("A", "a0"), row("B", "b0"), row("A", "a1")]);
        let a = &convs[0];
        assert_eq!(a.doc_id, "A");
        let got: Vec<_> = a.turns.iter().map(|t| (t.turn_index, t.source.as_str())).collect();
        assert_eq!(got, vec![(0, "a0"), (1, "a1")]);
    }

    #[test]
    fn stats_count_rows_and_directions() {
        let convs = assemble_conversations(vec![row("A", "1"), row("A", "2"), row("A", "3"), row("A", "4")]);
        let stats = split_stats(&convs, "toy");
        assert_eq!(stats.record_count, 4);
        assert_eq!(stats.conversation_count, 1);
        assert_eq!(stats.direction_counts.get("en-ko"), Some(&4));
        assert_eq!(stats.to_string(), "split=toy records=4 conversations=1 en-ko=4");
    }

    #[test]
    fn direction_parsing() {
        assert_eq!("ko-en".parse::<Direction>().unwrap(), Direction::ko_en());
        assert_eq!("en->ko".parse::<Direction>().unwrap(), Direction::en_ko());
        assert_eq!("en→ko".parse::<Direction>().unwrap(), Direction::en_ko());
        assert!("enko".parse::<Direction>().is_err());
    }
}
