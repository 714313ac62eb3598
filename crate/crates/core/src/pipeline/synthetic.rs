//! A small generated corpus whose correct translations depend on context,
//! and a mock backend that can only get them right when it sees that
//! context.
//!
//! Every conversation is about one game item. Three later turns refer to it
//! with a pronoun in the source language while the reference names the
//! item, so a translator without the earlier turns has to fall back to a
//! pronoun.

use std::collections::HashMap;

use crate::backend::{payload_lines, source_text, ChatMessage, MockBackend, Purpose, Role};
use crate::context::truncate_summary;
use crate::corpus::{ChatRecord, LanguageCode, Sender};

/// `(Korean, English)` item names.
pub const ITEMS: [(&str, &str); 8] = [
    ("전설의 검", "legendary sword"),
    ("용의 방패", "dragon shield"),
    ("마법 반지", "magic ring"),
    ("황금 투구", "golden helmet"),
    ("치유 물약", "healing potion"),
    ("불꽃 지팡이", "flame staff"),
    ("얼음 활", "ice bow"),
    ("강철 갑옷", "steel armor"),
];

const GREETINGS: [(&str, &str); 3] = [
    (
        "I'm sorry for the inconvenience. Could you tell me your character name?",
        "불편을 드려 죄송합니다. 캐릭터 이름을 알려주시겠어요?",
    ),
    (
        "Thank you for contacting us. What is your character name?",
        "문의해 주셔서 감사합니다. 캐릭터 이름이 무엇인가요?",
    ),
    (
        "I understand. May I have your character name, please?",
        "알겠습니다. 캐릭터 이름을 알려주실 수 있나요?",
    ),
];

const ENTITY: &str = "{entity}";

/// Object particle (을/를) for a Korean noun phrase.
pub fn object_particle(word: &str) -> &'static str {
    match word.chars().last() {
        Some(c) if ('\u{AC00}'..='\u{D7A3}').contains(&c) && !(c as u32 - 0xAC00).is_multiple_of(28) => "을",
        _ => "를",
    }
}

fn fill(template: &str, entity: Option<(&str, &str)>, target: &LanguageCode) -> String {
    match entity {
        Some((ko, _)) if target.is_korean() => template.replace(&format!("{ENTITY}을"), &format!("{ko}{}", object_particle(ko))),
        Some((_, en)) => template.replace(ENTITY, &format!("the {en}")),
        None if target.is_korean() => template.replace(&format!("{ENTITY}을"), "그것을"),
        None => template.replace(ENTITY, "it"),
    }
    .replace(ENTITY, "")
}

struct TurnSpec {
    sender: Sender,
    source: String,
    /// Target-side template; `{entity}` is the item, `{entity}을` the item
    /// with its object particle.
    target_template: String,
}

fn conversation_turns(item: usize, variant: usize) -> Vec<TurnSpec> {
    let (ko, en) = ITEMS[item];
    let particle = object_particle(ko);
    let (greet_en, greet_ko) = GREETINGS[variant % GREETINGS.len()];
    let name = format!("NAME-{}", item * GREETINGS.len() + variant + 1);
    vec![
        TurnSpec {
            sender: Sender::Customer,
            source: format!("{ko}{particle} 구매했는데 인벤토리에서 사라졌어요."),
            target_template: format!("I bought the {en} but it disappeared from my inventory."),
        },
        TurnSpec { sender: Sender::Agent, source: greet_en.into(), target_template: greet_ko.into() },
        TurnSpec {
            sender: Sender::Customer,
            source: format!("캐릭터 이름은 {name}입니다."),
            target_template: format!("My character name is {name}."),
        },
        TurnSpec {
            sender: Sender::Agent,
            source: "Thank you. When did you purchase it?".into(),
            target_template: format!("감사합니다. {ENTITY}을 언제 구매하셨나요?"),
        },
        TurnSpec {
            sender: Sender::Customer,
            source: "어제 샀어요. 그거 복구해 주실 수 있나요?".into(),
            target_template: format!("I bought it yesterday. Can you restore {ENTITY}?"),
        },
        TurnSpec {
            sender: Sender::Agent,
            source: "I have restored it to your inventory.".into(),
            target_template: format!("{ENTITY}을 인벤토리에 복구해 드렸습니다."),
        },
    ]
}

fn languages(sender: Sender) -> (LanguageCode, LanguageCode) {
    match sender {
        Sender::Customer => (LanguageCode::ko(), LanguageCode::en()),
        Sender::Agent => (LanguageCode::en(), LanguageCode::ko()),
    }
}

/// 24 conversations of 6 turns, ordered by conversation.
pub fn context_corpus() -> Vec<ChatRecord> {
    let mut rows = Vec::new();
    for (item, &entity) in ITEMS.iter().enumerate() {
        for variant in 0..GREETINGS.len() {
            let doc_id = format!("synthetic-{:02}", item * GREETINGS.len() + variant);
            for (turn_index, turn) in conversation_turns(item, variant).into_iter().enumerate() {
                let (source_language, target_language) = languages(turn.sender);
                let reference = fill(&turn.target_template, Some(entity), &target_language);
                rows.push(ChatRecord {
                    source_language,
                    target_language,
                    source: turn.source,
                    reference: Some(reference),
                    doc_id: doc_id.clone(),
                    client_id: None,
                    sender: turn.sender,
                    turn_index,
                    extra: Default::default(),
                });
            }
        }
    }
    rows
}

/// The bundled corpus as JSONL.
pub fn context_corpus_jsonl() -> String {
    let mut out = String::new();
    for row in context_corpus() {
        out.push_str(&serde_json::to_string(&row).expect("records serialize"));
        out.push('\n');
    }
    out
}

struct Lexicon {
    /// source text -> (target language, target template)
    entries: HashMap<String, (LanguageCode, String)>,
}

impl Lexicon {
    fn build() -> Self {
        let mut entries = HashMap::new();
        for (item, &entity) in ITEMS.iter().enumerate() {
            for variant in 0..GREETINGS.len() {
                for turn in conversation_turns(item, variant) {
                    let (_, target) = languages(turn.sender);
                    let template = if turn.target_template.contains(ENTITY) {
                        turn.target_template
                    } else {
                        // entity-specific turns translate literally
                        fill(&turn.target_template, Some(entity), &target)
                    };
                    entries.insert(turn.source, (target, template));
                }
            }
        }
        Lexicon { entries }
    }
}

/// The item mentioned last in `context`, in either language.
fn latest_item(context: &str) -> Option<(&'static str, &'static str)> {
    ITEMS
        .iter()
        .filter_map(|&(ko, en)| {
            let pos = [context.rfind(ko), context.rfind(en)].into_iter().flatten().max()?;
            Some((pos, (ko, en)))
        })
        .max_by_key(|(pos, _)| *pos)
        .map(|(_, item)| item)
}

/// Everything in the user turn except the `Source:` line.
fn visible_context(messages: &[ChatMessage]) -> String {
    messages
        .iter()
        .filter(|m| m.role == Role::User)
        .flat_map(|m| m.content.lines())
        .filter(|l| !l.starts_with("Source: "))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Mock translator for [`context_corpus`]. Resolves the item pronoun from
/// the history lines and the summary when they are present in the prompt;
/// summary requests get the payload lines joined and cut to 200 characters.
pub fn context_aware_backend() -> MockBackend {
    let lexicon = Lexicon::build();
    MockBackend::from_fn(move |messages, purpose| {
        if purpose == Purpose::Summary {
            return Ok(truncate_summary(&payload_lines(messages).join(" ")));
        }
        let Some(source) = source_text(messages) else {
            return Ok(String::new());
        };
        let Some((target, template)) = lexicon.entries.get(source) else {
            return Ok(source.to_string());
        };
        let entity = latest_item(&visible_context(messages));
        Ok(fill(template, entity, target))
    })
}
