use serde::{Deserialize, Serialize};

use super::language::{LanguageDetector, LanguageGuess};
use super::{BackendError, BackendResult, ChatBackend, ChatMessage, Purpose};
use crate::corpus::LanguageCode;

/// Re-generations allowed after a wrong-language answer.
pub const GUARD_EXTRA_ATTEMPTS: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardedOutcome {
    /// The last generation.
    pub result: BackendResult,
    pub guess: LanguageGuess,
    /// Set when every generation came back in the wrong language.
    pub mismatched: bool,
    /// Number of generations requested, 1..=3.
    pub generations: u32,
}

pub fn language_name(code: &LanguageCode) -> &str {
    match code.as_str() {
        "ko" => "Korean",
        "en" => "English",
        "de" => "German",
        "fr" => "French",
        "pt" => "Portuguese",
        "nl" => "Dutch",
        other => other,
    }
}

pub fn corrective_line(expected: &LanguageCode) -> String {
    format!("Respond ONLY in {}.", language_name(expected))
}

/// Translates, re-asking with a corrective instruction when the output is
/// not in `expected_target`.
pub fn guarded_translate<B: ChatBackend + ?Sized>(
    backend: &B,
    messages: &[ChatMessage],
    expected_target: &LanguageCode,
    detector: &LanguageDetector,
) -> Result<GuardedOutcome, BackendError> {
    let mut result = backend.complete(messages, Purpose::Translation)?;
    let mut guess = detector.detect(&result.text);
    let mut generations = 1;
    if guess.matches(expected_target) {
        return Ok(GuardedOutcome { result, guess, mismatched: false, generations });
    }

    let mut corrected = messages.to_vec();
    corrected.push(ChatMessage::user(corrective_line(expected_target)));
    for _ in 0..GUARD_EXTRA_ATTEMPTS {
        tracing::debug!(label = ?guess.label, expected = %expected_target, "wrong-language output, re-asking");
        result = backend.complete(&corrected, Purpose::Translation)?;
        guess = detector.detect(&result.text);
        generations += 1;
        if guess.matches(expected_target) {
            return Ok(GuardedOutcome { result, guess, mismatched: false, generations });
        }
    }
    Ok(GuardedOutcome { result, guess, mismatched: true, generations })
}
