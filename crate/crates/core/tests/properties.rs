use chatmt_core::backend::MockBackend;
use chatmt_core::context::{build_context, bundle_or_warning, truncate_summary, Summarizer, SummaryMode, HISTORY_WINDOW, SUMMARY_MAX_CHARS};
use chatmt_core::corpus::{assemble_conversations, flatten, parse_record, ChatRecord, Conversation, LanguageCode, Sender};
use chatmt_core::metrics::{bleu, chrf, BleuConfig, ChrfConfig, Tokenizer};
use proptest::prelude::*;

fn record(doc_id: &str, i: usize, source: String) -> ChatRecord {
    let korean = i % 2 == 1;
    ChatRecord {
        source_language: LanguageCode::new(if korean { "ko" } else { "en" }),
        target_language: LanguageCode::new(if korean { "en" } else { "ko" }),
        source,
        reference: None,
        doc_id: doc_id.to_string(),
        client_id: None,
        sender: if korean { Sender::Agent } else { Sender::Customer },
        turn_index: i,
        extra: Default::default(),
    }
}

fn conversation(turns: Vec<String>) -> Conversation {
    let records: Vec<_> = turns.into_iter().enumerate().map(|(i, s)| record("doc", i, s)).collect();
    assemble_conversations(records).pop().unwrap_or(Conversation { doc_id: "doc".into(), turns: vec![] })
}

fn turn_text() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z][a-zA-Z ,.?]{0,80}",
        "[가-힣][가-힣 ]{0,60}",
        // combining marks and emoji stress grapheme truncation
        "(e\u{301}|👍🏽|[a-z]){1,120}",
    ]
}

fn mode() -> impl Strategy<Value = SummaryMode> {
    prop_oneof![Just(SummaryMode::Incremental), Just(SummaryMode::PerPrefix)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn context_policy_holds_for_every_turn(turns in prop::collection::vec(turn_text(), 0..=50), mode in mode()) {
        let conv = conversation(turns);
        let summarizer = Summarizer::new(MockBackend::concat(), mode);
        for index in 0..conv.len() {
            let translations = |i: usize| (!i.is_multiple_of(3)).then(|| format!("t{i}"));
            let (bundle, warning) = bundle_or_warning(build_context(&conv, index, translations, &summarizer)).unwrap();
            prop_assert!(warning.is_none());
            prop_assert_eq!(bundle.history.len(), index.min(HISTORY_WINDOW));
            prop_assert_eq!(bundle.summary.is_some(), index > HISTORY_WINDOW);
            let covered = bundle.summary.as_ref().map_or(0, |s| s.covered_turns);
            prop_assert_eq!(covered + bundle.history.len(), index);
            if let Some(s) = &bundle.summary {
                prop_assert!(s.text.chars().count() <= SUMMARY_MAX_CHARS);
            }
            for (offset, entry) in bundle.history.iter().enumerate() {
                let source_index = index - bundle.history.len() + offset;
                prop_assert_eq!(&entry.original, &conv.turns[source_index].source);
                prop_assert_eq!(entry.translation.clone(), translations(source_index));
            }
        }
    }
}

proptest! {
    #[test]
    fn truncation_is_a_bounded_prefix(text in "(e\u{301}|👍🏽|한|[a-z ]){0,400}") {
        let cut = truncate_summary(&text);
        prop_assert!(text.starts_with(&cut));
        prop_assert!(cut.chars().count() <= SUMMARY_MAX_CHARS);
        if text.chars().count() <= SUMMARY_MAX_CHARS {
            prop_assert_eq!(cut, text);
        }
    }

    #[test]
    fn parse_record_never_panics(line in "\\PC{0,200}") {
        let _ = parse_record(&line, 1);
    }

    #[test]
    fn parse_record_never_panics_on_near_json(
        fields in prop::collection::vec(("(source|doc_id|sender|source_language|target_language|reference|turn_index|x)", prop_oneof![
            Just("null".to_string()), Just("1".to_string()), Just("[]".to_string()), Just("{}".to_string()),
            "\"[a-z]{0,8}\"".prop_map(|s| s), Just("\"customer\"".to_string()), Just("\"ko\"".to_string()),
        ]), 0..8)
    ) {
        let body: Vec<String> = fields.iter().map(|(k, v)| format!("\"{k}\":{v}")).collect();
        let _ = parse_record(&format!("{{{}}}", body.join(",")), 1);
    }

    #[test]
    fn assemble_then_flatten_is_a_permutation(docs in prop::collection::vec(0usize..5, 0..40)) {
        let records: Vec<ChatRecord> = docs.iter().enumerate().map(|(i, d)| record(&format!("d{d}"), 0, format!("row {i}"))).collect();
        let conversations = assemble_conversations(records.clone());
        let mut flat: Vec<String> = flatten(&conversations).map(|r| r.source.clone()).collect();
        let mut original: Vec<String> = records.iter().map(|r| r.source.clone()).collect();
        // order within a conversation is preserved
        for c in &conversations {
            let rows: Vec<usize> = c.turns.iter().map(|t| t.source[4..].parse().unwrap()).collect();
            prop_assert!(rows.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(c.turns.iter().enumerate().all(|(i, t)| t.turn_index == i));
        }
        flat.sort();
        original.sort();
        prop_assert_eq!(flat, original);
    }

    #[test]
    fn chrf_with_beta_one_is_symmetric(a in "[a-d ]{0,30}", b in "[a-d ]{0,30}") {
        let config = ChrfConfig { beta: 1.0, ..ChrfConfig::default() };
        let ab = chrf(&[&a], &[&b], &config).unwrap();
        let ba = chrf(&[&b], &[&a], &config).unwrap();
        prop_assert!((ab - ba).abs() < 1e-9);
    }

    #[test]
    fn corpus_scores_ignore_segment_order(
        pairs in prop::collection::vec(("[a-c]{1,3}( [a-c]{1,3}){0,6}", "[a-c]{1,3}( [a-c]{1,3}){0,6}"), 1..12),
        seed in any::<u64>(),
    ) {
        let mut shuffled = pairs.clone();
        let n = shuffled.len();
        for i in 0..n {
            shuffled.swap(i, (seed as usize).wrapping_add(i * 7) % n);
        }
        let score = |p: &[(String, String)]| {
            let hyps: Vec<&str> = p.iter().map(|x| x.0.as_str()).collect();
            let refs: Vec<&str> = p.iter().map(|x| x.1.as_str()).collect();
            (bleu(&hyps, &refs, &BleuConfig::default()).unwrap(), chrf(&hyps, &refs, &ChrfConfig::default()).unwrap())
        };
        let (b1, c1) = score(&pairs);
        let (b2, c2) = score(&shuffled);
        prop_assert!((b1 - b2).abs() < 1e-9);
        prop_assert!((c1 - c2).abs() < 1e-9);
    }

    #[test]
    fn identical_output_scores_exactly_100(
        en in prop::collection::vec("[a-z]{1,6}( [a-z]{1,6}){0,8}", 1..10),
        ko in prop::collection::vec("[가-힣]{1,6}( [가-힣]{1,4}){0,5}", 1..10),
    ) {
        prop_assert_eq!(bleu(&en, &en, &BleuConfig::default()).unwrap(), 100.0);
        prop_assert_eq!(chrf(&en, &en, &ChrfConfig::default()).unwrap(), 100.0);
        let korean = BleuConfig { tokenizer: Tokenizer::CharForKorean, ..BleuConfig::default() };
        prop_assert_eq!(bleu(&ko, &ko, &korean).unwrap(), 100.0);
        prop_assert_eq!(chrf(&ko, &ko, &ChrfConfig::default()).unwrap(), 100.0);
    }
}
