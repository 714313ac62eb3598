//! System prompt, task instruction and chat messages for one translation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::ChatMessage;
use crate::context::{ContextBundle, HistoryEntry, Summary};
use crate::corpus::Direction;

const SYSTEM_TEMPLATE: &str = include_str!("../templates/system.txt");
const INSTRUCTION_TEMPLATE: &str = include_str!("../templates/instruction.txt");
const MINIMAL_INSTRUCTION_TEMPLATE: &str = include_str!("../templates/instruction_minimal.txt");
const DOMAIN_NOTE: &str = include_str!("../templates/domain_note.txt");

pub const DIALOGUE_CONTEXT_LABEL: &str = "Dialogue Context: ";
pub const SOURCE_LABEL: &str = "Source: ";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("unsupported direction {0}; only ko-en and en-ko have prompt templates")]
    UnsupportedDirection(Direction),
}

fn strip_file_newline(s: &str) -> &str {
    s.strip_suffix('\n').unwrap_or(s)
}

pub fn render_system() -> String {
    strip_file_newline(SYSTEM_TEMPLATE).to_string()
}

pub fn default_domain_note() -> &'static str {
    strip_file_newline(DOMAIN_NOTE)
}

fn language_names(direction: &Direction) -> Result<(&'static str, &'static str), PromptError> {
    match (direction.source.as_str(), direction.target.as_str()) {
        ("ko", "en") => Ok(("Korean", "English")),
        ("en", "ko") => Ok(("English", "Korean")),
        _ => Err(PromptError::UnsupportedDirection(direction.clone())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InstructionStyle {
    /// Full instruction with all six guideline bullets.
    #[default]
    Detailed,
    /// Opening sentence plus the output-format bullet only.
    Minimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub domain_note: String,
    pub style: InstructionStyle,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate { domain_note: default_domain_note().to_string(), style: InstructionStyle::Detailed }
    }
}

impl PromptTemplate {
    pub fn minimal() -> Self {
        PromptTemplate { style: InstructionStyle::Minimal, ..Default::default() }
    }

    pub fn render_instruction(&self, direction: &Direction, summary: Option<&Summary>) -> Result<String, PromptError> {
        let (source, target) = language_names(direction)?;
        let template = match self.style {
            InstructionStyle::Detailed => INSTRUCTION_TEMPLATE,
            InstructionStyle::Minimal => MINIMAL_INSTRUCTION_TEMPLATE,
        };
        let mut out = strip_file_newline(template)
            .replace("{source_language}", source)
            .replace("{target_language}", target)
            .replace("{domain_note}", self.domain_note.trim());
        if let Some(summary) = summary.filter(|s| !s.text.is_empty()) {
            out.push('\n');
            out.push_str(DIALOGUE_CONTEXT_LABEL);
            out.push_str(&summary.text);
        }
        Ok(out)
    }

    pub fn package(&self, direction: &Direction, bundle: &ContextBundle, source: &str) -> Result<PromptPackage, PromptError> {
        Ok(PromptPackage {
            system: render_system(),
            instruction: self.render_instruction(direction, bundle.summary.as_ref())?,
            source: source.to_string(),
            direction: direction.clone(),
            history: bundle.history.clone(),
        })
    }
}

/// Instruction with the default domain note.
pub fn render_instruction(direction: &Direction, summary: Option<&Summary>) -> Result<String, PromptError> {
    PromptTemplate::default().render_instruction(direction, summary)
}

/// `[system, user]`. The user message holds the instruction, the history
/// entries oldest first, then the `Source:` line.
pub fn render_messages(bundle: &ContextBundle, instruction: &str, system: &str, source: &str) -> Vec<ChatMessage> {
    vec![ChatMessage::system(system), ChatMessage::user(user_message(&bundle.history, instruction, source))]
}

fn user_message(history: &[HistoryEntry], instruction: &str, source: &str) -> String {
    let mut user = String::from(instruction);
    for entry in history {
        user.push('\n');
        user.push_str(&entry.render());
    }
    user.push('\n');
    user.push_str(SOURCE_LABEL);
    user.push_str(source);
    user
}

/// Everything sent to the model for one turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPackage {
    pub system: String,
    pub instruction: String,
    pub source: String,
    pub direction: Direction,
    #[serde(default)]
    pub history: Vec<HistoryEntry>,
}

impl PromptPackage {
    pub fn messages(&self) -> Vec<ChatMessage> {
        vec![
            ChatMessage::system(self.system.clone()),
            ChatMessage::user(user_message(&self.history, &self.instruction, &self.source)),
        ]
    }
}
