//! Session events and the state they fold into.

use chatmt_core::backend::LanguageGuess;
use chatmt_core::context::{HistoryEntry, Summary, HISTORY_WINDOW};
use chatmt_core::corpus::{Direction, LanguageCode, Sender};
use chatmt_core::prompting::PromptPackage;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnStatus {
    Pending,
    Translated,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub sender: Sender,
    pub original: String,
    pub translation: Option<String>,
    pub language_guess: Option<LanguageGuess>,
    pub status: TurnStatus,
    pub generations: u32,
    pub mismatched: bool,
    pub error: Option<String>,
    /// What was sent to the model for this turn.
    pub prompt: Option<PromptPackage>,
    pub summary_warning: Option<String>,
    pub timestamp: String,
}

impl Turn {
    pub fn history_entry(&self) -> HistoryEntry {
        HistoryEntry::new(self.sender, self.original.clone(), self.translation.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub customer_language: LanguageCode,
    pub agent_language: LanguageCode,
    pub turns: Vec<Turn>,
    pub summary: Summary,
    pub created_at: String,
    /// Sequence number of the last applied event.
    pub last_sequence: u64,
}

impl SessionState {
    /// Direction of a message from `sender`: their language into the other
    /// participant's.
    pub fn direction_for(&self, sender: Sender) -> Direction {
        match sender {
            Sender::Customer => Direction::new(self.customer_language.clone(), self.agent_language.clone()),
            Sender::Agent => Direction::new(self.agent_language.clone(), self.customer_language.clone()),
        }
    }

    /// Indices of the turns the next message will see verbatim.
    pub fn history_window(&self) -> Vec<usize> {
        let n = self.turns.len();
        (n.saturating_sub(HISTORY_WINDOW)..n).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    Created {
        customer_language: LanguageCode,
        agent_language: LanguageCode,
    },
    MessagePosted {
        turn_index: usize,
        sender: Sender,
        text: String,
    },
    SummaryUpdated {
        summary: Summary,
    },
    Translated {
        turn_index: usize,
        translation: String,
        language_guess: LanguageGuess,
        generations: u32,
        mismatched: bool,
        prompt: PromptPackage,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        summary_warning: Option<String>,
    },
    TranslationFailed {
        turn_index: usize,
        error: String,
        prompt: Option<PromptPackage>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        summary_warning: Option<String>,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Created { .. } => "created",
            EventKind::MessagePosted { .. } => "message_posted",
            EventKind::SummaryUpdated { .. } => "summary_updated",
            EventKind::Translated { .. } => "translated",
            EventKind::TranslationFailed { .. } => "translation_failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub sequence: u64,
    pub session_id: String,
    pub timestamp: String,
    #[serde(flatten)]
    pub kind: EventKind,
}

fn corrupt(message: impl Into<String>) -> ServiceError {
    ServiceError::CorruptLog(message.into())
}

/// Starts a state from a `created` event.
pub fn initial_state(event: &SessionEvent) -> Result<SessionState, ServiceError> {
    let EventKind::Created { customer_language, agent_language } = &event.kind else {
        return Err(corrupt(format!("first event is {}, expected created", event.kind.name())));
    };
    if event.sequence != 1 {
        return Err(corrupt(format!("created event has sequence {}", event.sequence)));
    }
    Ok(SessionState {
        session_id: event.session_id.clone(),
        customer_language: customer_language.clone(),
        agent_language: agent_language.clone(),
        turns: Vec::new(),
        summary: Summary::empty(),
        created_at: event.timestamp.clone(),
        last_sequence: 1,
    })
}

/// Applies one event after the `created` event.
pub fn apply(state: &mut SessionState, event: &SessionEvent) -> Result<(), ServiceError> {
    if event.sequence != state.last_sequence + 1 {
        return Err(corrupt(format!("sequence gap: {} follows {}", event.sequence, state.last_sequence)));
    }
    if event.session_id != state.session_id {
        return Err(corrupt(format!("event {} belongs to session {}", event.sequence, event.session_id)));
    }
    match &event.kind {
        EventKind::Created { .. } => return Err(corrupt(format!("second created event at {}", event.sequence))),
        EventKind::MessagePosted { turn_index, sender, text } => {
            if *turn_index != state.turns.len() {
                return Err(corrupt(format!("message for turn {turn_index} but session has {}", state.turns.len())));
            }
            state.turns.push(Turn {
                index: *turn_index,
                sender: *sender,
                original: text.clone(),
                translation: None,
                language_guess: None,
                status: TurnStatus::Pending,
                generations: 0,
                mismatched: false,
                error: None,
                prompt: None,
                summary_warning: None,
                timestamp: event.timestamp.clone(),
            });
        }
        EventKind::SummaryUpdated { summary } => state.summary = summary.clone(),
        EventKind::Translated { turn_index, translation, language_guess, generations, mismatched, prompt, summary_warning } => {
            let turn = turn_mut(state, *turn_index, event.sequence)?;
            turn.translation = Some(translation.clone());
            turn.language_guess = Some(*language_guess);
            turn.status = TurnStatus::Translated;
            turn.generations = *generations;
            turn.mismatched = *mismatched;
            turn.error = None;
            turn.prompt = Some(prompt.clone());
            turn.summary_warning = summary_warning.clone();
        }
        EventKind::TranslationFailed { turn_index, error, prompt, summary_warning } => {
            let turn = turn_mut(state, *turn_index, event.sequence)?;
            turn.status = TurnStatus::Failed;
            turn.error = Some(error.clone());
            if prompt.is_some() {
                turn.prompt = prompt.clone();
            }
            turn.summary_warning = summary_warning.clone();
        }
    }
    state.last_sequence = event.sequence;
    Ok(())
}

fn turn_mut(state: &mut SessionState, index: usize, sequence: u64) -> Result<&mut Turn, ServiceError> {
    state.turns.get_mut(index).ok_or_else(|| corrupt(format!("event {sequence} names unknown turn {index}")))
}

/// Rebuilds a session from its log without calling any backend.
pub fn replay(events: &[SessionEvent]) -> Result<SessionState, ServiceError> {
    let (first, rest) = events.split_first().ok_or_else(|| corrupt("empty log: missing created event"))?;
    let mut state = initial_state(first)?;
    for event in rest {
        apply(&mut state, event)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(sequence: u64, kind: EventKind) -> SessionEvent {
        SessionEvent { sequence, session_id: "s".into(), timestamp: "t".into(), kind }
    }

    fn created() -> SessionEvent {
        event(1, EventKind::Created { customer_language: LanguageCode::ko(), agent_language: LanguageCode::en() })
    }

    fn posted(seq: u64, turn_index: usize) -> SessionEvent {
        event(seq, EventKind::MessagePosted { turn_index, sender: Sender::Agent, text: "Am I correct?".into() })
    }

    #[test]
    fn empty_log_is_corrupt() {
        assert!(matches!(replay(&[]), Err(ServiceError::CorruptLog(_))));
    }

    #[test]
    fn gap_is_corrupt() {
        let log = vec![created(), posted(2, 0), posted(4, 1)];
        let err = replay(&log).unwrap_err();
        assert!(err.to_string().contains("sequence gap"), "{err}");
    }

    #[test]
    fn log_must_start_with_created() {
        assert!(matches!(replay(&[posted(1, 0)]), Err(ServiceError::CorruptLog(_))));
    }

    #[test]
    fn event_json_layout() {
        let json = serde_json::to_value(posted(2, 0)).unwrap();
        assert_eq!(json["kind"], "message_posted");
        assert_eq!(json["sequence"], 2);
        assert_eq!(json["payload"]["text"], "Am I correct?");
        let back: SessionEvent = serde_json::from_value(json).unwrap();
        assert_eq!(back, posted(2, 0));
    }

    #[test]
    fn history_window_is_last_two() {
        let mut state = replay(&[created(), posted(2, 0), posted(3, 1), posted(4, 2)]).unwrap();
        assert_eq!(state.history_window(), vec![1, 2]);
        state.turns.truncate(1);
        assert_eq!(state.history_window(), vec![0]);
    }
}
