//! Session bookkeeping. Every state change is an event: appended to the
//! session's log, applied to the in-memory state, then broadcast.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use chatmt_core::backend::{guarded_translate, ChatBackend, LanguageDetector};
use chatmt_core::context::{summarize_turns, update_summary_incremental, ContextBundle, HistoryEntry, Summary, SummaryMode, HISTORY_WINDOW};
use chatmt_core::corpus::{LanguageCode, Sender};
use chatmt_core::prompting::{PromptPackage, PromptTemplate};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use crate::events::{apply, initial_state, replay, EventKind, SessionEvent, SessionState, Turn, TurnStatus};
use crate::store::{list_logs, read_log, EventLog};
use crate::ServiceError;

#[derive(Debug, Clone)]
pub struct ManagerConfig {
    pub summary_mode: SummaryMode,
    pub template: PromptTemplate,
    pub broadcast_capacity: usize,
}

impl Default for ManagerConfig {
    fn default() -> Self {
        ManagerConfig { summary_mode: SummaryMode::Incremental, template: PromptTemplate::default(), broadcast_capacity: 1024 }
    }
}

/// Result of posting or retrying a message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnOutcome {
    pub turn: Turn,
    pub summary_after: Summary,
}

struct Session {
    state: SessionState,
    events: Vec<SessionEvent>,
    log: EventLog,
}

impl Session {
    fn record(&mut self, kind: EventKind, tx: &broadcast::Sender<SessionEvent>) -> Result<(), ServiceError> {
        let event = SessionEvent {
            sequence: self.state.last_sequence + 1,
            session_id: self.state.session_id.clone(),
            timestamp: now(),
            kind,
        };
        self.log.append(&event)?;
        apply(&mut self.state, &event)?;
        self.events.push(event.clone());
        // no subscribers is fine
        let _ = tx.send(event);
        Ok(())
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true)
}

fn lock(session: &Mutex<Session>) -> MutexGuard<'_, Session> {
    session.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

pub struct SessionManager {
    data_dir: PathBuf,
    backend: Arc<dyn ChatBackend>,
    config: ManagerConfig,
    detector: LanguageDetector,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    events: broadcast::Sender<SessionEvent>,
}

impl SessionManager {
    /// Opens `data_dir`, creating it if needed, and replays every log in it.
    pub fn open(data_dir: impl Into<PathBuf>, backend: Arc<dyn ChatBackend>, config: ManagerConfig) -> Result<Self, ServiceError> {
        let data_dir = data_dir.into();
        std::fs::create_dir_all(&data_dir).map_err(|e| ServiceError::Storage(format!("{}: {e}", data_dir.display())))?;
        let mut sessions = HashMap::new();
        for path in list_logs(&data_dir)? {
            let events = read_log(&path)?;
            let state = replay(&events)?;
            let log = EventLog::open(&path)?;
            sessions.insert(state.session_id.clone(), Arc::new(Mutex::new(Session { state, events, log })));
        }
        tracing::info!(sessions = sessions.len(), dir = %data_dir.display(), "session store opened");
        let (events, _) = broadcast::channel(config.broadcast_capacity.max(1));
        Ok(SessionManager { data_dir, backend, config, detector: LanguageDetector::new(), sessions: RwLock::new(sessions), events })
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        let sessions = self.sessions.read().unwrap_or_else(|p| p.into_inner());
        sessions.get(id).cloned().ok_or_else(|| ServiceError::SessionNotFound(id.to_string()))
    }

    pub fn create_session(&self, customer_language: &str, agent_language: &str) -> Result<String, ServiceError> {
        let customer = LanguageCode::new(customer_language);
        let agent = LanguageCode::new(agent_language);
        let supported = |c: &LanguageCode| matches!(c.as_str(), "ko" | "en");
        if !supported(&customer) || !supported(&agent) || customer == agent {
            return Err(ServiceError::BadLanguagePair { customer: customer_language.into(), agent: agent_language.into() });
        }
        let session_id = uuid::Uuid::new_v4().simple().to_string();
        let created = SessionEvent {
            sequence: 1,
            session_id: session_id.clone(),
            timestamp: now(),
            kind: EventKind::Created { customer_language: customer, agent_language: agent },
        };
        let mut log = EventLog::create(&self.data_dir, &session_id)?;
        log.append(&created)?;
        let state = initial_state(&created)?;
        let session = Session { state, events: vec![created.clone()], log };
        self.sessions.write().unwrap_or_else(|p| p.into_inner()).insert(session_id.clone(), Arc::new(Mutex::new(session)));
        let _ = self.events.send(created);
        Ok(session_id)
    }

    pub fn get_session(&self, id: &str) -> Result<SessionState, ServiceError> {
        let session = self.session(id)?;
        let state = lock(&session).state.clone();
        Ok(state)
    }

    /// The session's events so far, in order.
    pub fn events(&self, id: &str) -> Result<Vec<SessionEvent>, ServiceError> {
        let session = self.session(id)?;
        let events = lock(&session).events.clone();
        Ok(events)
    }

    /// Live events for all sessions. Subscribe before reading
    /// [`Self::events`] to see every event exactly once.
    pub fn subscribe(&self) -> broadcast::Receiver<SessionEvent> {
        self.events.subscribe()
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().unwrap_or_else(|p| p.into_inner()).keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn post_message(&self, id: &str, sender: Sender, text: &str) -> Result<TurnOutcome, ServiceError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(ServiceError::EmptyMessage);
        }
        let session = self.session(id)?;
        let mut session = lock(&session);
        let index = session.state.turns.len();
        session.record(EventKind::MessagePosted { turn_index: index, sender, text: text.to_string() }, &self.events)?;

        let window_start = index.saturating_sub(HISTORY_WINDOW);
        let summary_warning = self.catch_up_summary(&mut session, window_start)?;
        let history: Vec<HistoryEntry> = session.state.turns[window_start..index].iter().map(Turn::history_entry).collect();
        let summary = &session.state.summary;
        let bundle = ContextBundle { history, summary: (!summary.is_empty()).then(|| summary.clone()) };
        let direction = session.state.direction_for(sender);
        let package = self.config.template.package(&direction, &bundle, text)?;
        self.translate(&mut session, index, package, summary_warning)
    }

    /// Re-sends a failed turn with the prompt it was built with.
    pub fn retry_turn(&self, id: &str, turn_index: usize) -> Result<TurnOutcome, ServiceError> {
        let session = self.session(id)?;
        let mut session = lock(&session);
        let turn = session
            .state
            .turns
            .get(turn_index)
            .ok_or_else(|| ServiceError::TurnNotFound { session_id: id.to_string(), turn_index })?;
        if turn.status != TurnStatus::Failed {
            return Err(ServiceError::TurnNotRetryable { turn_index, status: turn.status });
        }
        let package = turn.prompt.clone().ok_or_else(|| ServiceError::CorruptLog(format!("failed turn {turn_index} has no prompt")))?;
        let warning = turn.summary_warning.clone();
        self.translate(&mut session, turn_index, package, warning)
    }

    /// Extends the summary until it covers every turn before `window_start`.
    /// A summarizer failure leaves the summary behind and is reported as a
    /// warning; the translation goes ahead with what is there.
    fn catch_up_summary(&self, session: &mut Session, window_start: usize) -> Result<Option<String>, ServiceError> {
        while session.state.summary.covered_turns < window_start {
            let next = match self.config.summary_mode {
                SummaryMode::Incremental => {
                    let evicted = session.state.turns[session.state.summary.covered_turns].history_entry();
                    update_summary_incremental(&session.state.summary, &evicted, &*self.backend)
                }
                SummaryMode::PerPrefix => {
                    let earlier: Vec<HistoryEntry> = session.state.turns[..window_start].iter().map(Turn::history_entry).collect();
                    summarize_turns(&earlier, &*self.backend)
                }
            };
            match next {
                Ok(summary) => session.record(EventKind::SummaryUpdated { summary }, &self.events)?,
                Err(e) => {
                    tracing::warn!(session = %session.state.session_id, "summary update failed: {e}");
                    return Ok(Some(e.to_string()));
                }
            }
        }
        Ok(None)
    }

    fn translate(
        &self,
        session: &mut Session,
        turn_index: usize,
        prompt: PromptPackage,
        summary_warning: Option<String>,
    ) -> Result<TurnOutcome, ServiceError> {
        match guarded_translate(&*self.backend, &prompt.messages(), &prompt.direction.target, &self.detector) {
            Ok(out) => {
                let kind = EventKind::Translated {
                    turn_index,
                    translation: out.result.text,
                    language_guess: out.guess,
                    generations: out.generations,
                    mismatched: out.mismatched,
                    prompt,
                    summary_warning,
                };
                session.record(kind, &self.events)?;
                Ok(TurnOutcome { turn: session.state.turns[turn_index].clone(), summary_after: session.state.summary.clone() })
            }
            Err(source) => {
                let kind = EventKind::TranslationFailed { turn_index, error: source.to_string(), prompt: Some(prompt), summary_warning };
                session.record(kind, &self.events)?;
                Err(ServiceError::TranslationFailed { turn: Box::new(session.state.turns[turn_index].clone()), source })
            }
        }
    }
}
