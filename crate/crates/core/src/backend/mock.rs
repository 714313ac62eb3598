//! Deterministic in-process backends for tests and offline runs.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use super::{prompt_hash, validate_messages, BackendError, BackendResult, ChatBackend, ChatMessage, Purpose, Role};

type Responder = dyn Fn(&[ChatMessage], Purpose) -> Result<String, BackendError> + Send + Sync;

/// Line labels the mocks strip when extracting payload text.
const LABELS: [&str; 4] = ["Source: ", "customer: ", "agent: ", "Summary so far: "];

fn strip_label(line: &str) -> &str {
    LABELS
        .iter()
        .find_map(|label| line.strip_prefix(label))
        .unwrap_or(line)
}

fn last_user_content(messages: &[ChatMessage]) -> &str {
    messages
        .iter()
        .rev()
        .find(|m| m.role == Role::User)
        .map(|m| m.content.as_str())
        .unwrap_or("")
}

/// Text of the last `Source: ` line across the user messages.
pub fn source_text(messages: &[ChatMessage]) -> Option<&str> {
    messages
        .iter()
        .rev()
        .filter(|m| m.role == Role::User)
        .flat_map(|m| m.content.lines().rev())
        .find_map(|line| line.strip_prefix("Source: "))
}

/// Lines following the header line of a summary prompt (the first line
/// ending in `:`), with speaker labels removed.
pub fn payload_lines(messages: &[ChatMessage]) -> Vec<&str> {
    let content = last_user_content(messages);
    let mut lines = content.lines();
    let mut skipped_header = false;
    let mut out = Vec::new();
    for line in lines.by_ref() {
        if !skipped_header {
            skipped_header = line.trim_end().ends_with(':');
            continue;
        }
        if !line.trim().is_empty() {
            out.push(strip_label(line));
        }
    }
    if !skipped_header {
        return content.lines().filter(|l| !l.trim().is_empty()).map(strip_label).collect();
    }
    out
}

pub struct MockBackend {
    responder: Box<Responder>,
    calls: Mutex<Vec<Vec<ChatMessage>>>,
}

impl std::fmt::Debug for MockBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MockBackend").field("calls", &self.call_count()).finish()
    }
}

impl MockBackend {
    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&[ChatMessage], Purpose) -> Result<String, BackendError> + Send + Sync + 'static,
    {
        MockBackend { responder: Box::new(f), calls: Mutex::new(Vec::new()) }
    }

    /// Returns the source text of a translation prompt, or the last payload
    /// line of a summary prompt.
    pub fn echo() -> Self {
        Self::from_fn(|messages, _| {
            Ok(source_text(messages)
                .map(str::to_string)
                .or_else(|| payload_lines(messages).last().map(|s| s.to_string()))
                .unwrap_or_default())
        })
    }

    /// Joins every payload line of the prompt with a space.
    pub fn concat() -> Self {
        Self::from_fn(|messages, _| Ok(payload_lines(messages).join(" ")))
    }

    /// Placeholder translation in the target language named by the
    /// instruction ("... to Korean." / "... to English."), so the language
    /// guard accepts it. Summary prompts get [`MockBackend::concat`]
    /// behaviour.
    pub fn pseudo() -> Self {
        Self::from_fn(|messages, purpose| {
            if purpose == Purpose::Summary {
                return Ok(payload_lines(messages).join(" "));
            }
            let chars = source_text(messages).map_or(0, |s| s.chars().count());
            let to_korean = messages.iter().any(|m| m.role == Role::User && m.content.contains(" to Korean."));
            Ok(if to_korean { format!("번역문 {chars}자") } else { format!("translation of {chars} characters") })
        })
    }

    /// Looks responses up by [`prompt_hash`], falling back to `fallback`.
    pub fn canned(responses: HashMap<String, String>, fallback: Option<String>) -> Self {
        Self::from_fn(move |messages, _| {
            responses
                .get(&prompt_hash(messages))
                .or(fallback.as_ref())
                .cloned()
                .ok_or_else(|| BackendError::ProtocolError("no canned response for prompt".into()))
        })
    }

    /// Plays the given outcomes in order, then keeps repeating the last one.
    pub fn scripted(script: Vec<Result<String, BackendError>>) -> Self {
        assert!(!script.is_empty(), "script must not be empty");
        let cursor = Mutex::new(0usize);
        Self::from_fn(move |_, _| {
            let mut i = cursor.lock().unwrap_or_else(|e| e.into_inner());
            let out = script[(*i).min(script.len() - 1)].clone();
            *i += 1;
            out
        })
    }

    pub fn failing(error: BackendError) -> Self {
        Self::from_fn(move |_, _| Err(error.clone()))
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().map(|c| c.len()).unwrap_or(0)
    }

    /// Every message list received so far, in call order.
    pub fn calls(&self) -> Vec<Vec<ChatMessage>> {
        self.calls.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, messages: &[ChatMessage], purpose: Purpose) -> Result<BackendResult, BackendError> {
        validate_messages(messages)?;
        self.calls
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(messages.to_vec());
        let text = (self.responder)(messages, purpose)?;
        Ok(BackendResult {
            text: text.trim().to_string(),
            latency: Duration::ZERO,
            attempts: 1,
            raw_finish_reason: "stop".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn translation_prompt(source: &str) -> Vec<ChatMessage> {
        vec![
            ChatMessage::system("sys"),
            ChatMessage::user(format!("Translate.\ncustomer: earlier\nSource: {source}")),
        ]
    }

    #[test]
    fn canned_response_by_prompt_hash() {
        let prompt = translation_prompt("비밀번호 재설정 메일이 도착하지 않습니다.");
        let mut map = HashMap::new();
        map.insert(prompt_hash(&prompt), "I don't receive a password reset email.".to_string());
        let mock = MockBackend::canned(map, None);
        let result = mock.complete(&prompt, Purpose::Translation).unwrap();
        assert_eq!(result.text, "I don't receive a password reset email.");
        assert_eq!(result.attempts, 1);
        assert!(mock.complete(&translation_prompt("other"), Purpose::Translation).is_err());
    }

    #[test]
    fn echo_prefers_the_source_line() {
        let mock = MockBackend::echo();
        let out = mock.complete(&translation_prompt("hello"), Purpose::Translation).unwrap();
        assert_eq!(out.text, "hello");
        let summary_prompt = vec![
            ChatMessage::system("sys"),
            ChatMessage::user("Summarize this. Conversation:\ncustomer: hello"),
        ];
        assert_eq!(mock.complete(&summary_prompt, Purpose::Summary).unwrap().text, "hello");
    }

    #[test]
    fn concat_joins_payload() {
        let prompt = vec![
            ChatMessage::system("sys"),
            ChatMessage::user("Update. Conversation:\nSummary so far: A was greeted\ncustomer: B asked about refunds"),
        ];
        let out = MockBackend::concat().complete(&prompt, Purpose::Summary).unwrap();
        assert_eq!(out.text, "A was greeted B asked about refunds");
    }

    #[test]
    fn scripted_repeats_last_entry() {
        let mock = MockBackend::scripted(vec![Ok("a".into()), Ok("b".into())]);
        let p = translation_prompt("x");
        let texts: Vec<_> = (0..3).map(|_| mock.complete(&p, Purpose::Translation).unwrap().text).collect();
        assert_eq!(texts, ["a", "b", "b"]);
        assert_eq!(mock.call_count(), 3);
    }

    #[test]
    fn same_messages_same_result() {
        let mock = MockBackend::echo();
        let p = translation_prompt("deterministic");
        assert_eq!(
            mock.complete(&p, Purpose::Translation).unwrap(),
            mock.complete(&p, Purpose::Translation).unwrap()
        );
    }

    #[test]
    fn pseudo_answers_in_the_target_language() {
        let to_korean = vec![ChatMessage::system("sys"), ChatMessage::user("Translate the source from English to Korean.\nSource: Hello")];
        let to_english = vec![ChatMessage::system("sys"), ChatMessage::user("Translate the source from Korean to English.\nSource: 안녕하세요")];
        let mock = MockBackend::pseudo();
        assert_eq!(mock.complete(&to_korean, Purpose::Translation).unwrap().text, "번역문 5자");
        assert_eq!(mock.complete(&to_english, Purpose::Translation).unwrap().text, "translation of 5 characters");
    }
}
