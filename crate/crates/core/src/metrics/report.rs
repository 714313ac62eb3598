//! Sentence-, document- and corpus-level scores for a translated dataset.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bleu::{BleuConfig, BleuStats, Smoothing, Tokenizer};
use super::chrf::{ChrfConfig, ChrfStats};
use super::tags::{tag_formality_ko, tag_lexical_cohesion, Prf, TagCounts, TagSpan};
use super::MetricError;
use crate::corpus::{Direction, LanguageCode};

/// One translated row, aligned with its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub doc_id: String,
    pub turn_index: usize,
    pub direction: Direction,
    pub source: String,
    pub hypothesis: String,
    pub reference: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub chrf: ChrfConfig,
    pub max_ngram_order: usize,
    /// Smoothing for per-sentence BLEU. Document and corpus BLEU are unsmoothed.
    pub sentence_smoothing: Smoothing,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig { chrf: ChrfConfig::default(), max_ngram_order: 4, sentence_smoothing: Smoothing::AddOneOnZero }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub bleu: f64,
    pub chrf: f64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub doc_id: String,
    pub turn_index: usize,
    pub direction: Direction,
    pub bleu: f64,
    pub chrf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct TaggerReport {
    pub formality: Prf,
    pub lexical_cohesion: Prf,
    pub formality_counts: TagCounts,
    pub lexical_cohesion_counts: TagCounts,
}

/// Scores supplied by external neural scorers, when configured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ExternalScores {
    pub comet: Option<f64>,
    pub context_qe: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_sentence: Vec<SentenceScore>,
    pub corpus: Scores,
    pub per_document: BTreeMap<String, Scores>,
    pub per_direction: BTreeMap<String, Scores>,
    pub tagger: TaggerReport,
    #[serde(default)]
    pub external: ExternalScores,
}

#[derive(Clone)]
struct Accumulator {
    bleu: BleuStats,
    chrf: ChrfStats,
    rows: usize,
}

impl Accumulator {
    fn new(config: &ReportConfig) -> Self {
        Accumulator {
            bleu: BleuStats::new(config.max_ngram_order),
            chrf: ChrfStats::new(config.chrf.max_char_order),
            rows: 0,
        }
    }

    fn push(&mut self, bleu: &BleuStats, chrf: &ChrfStats) {
        self.bleu.add(bleu);
        self.chrf.add(chrf);
        self.rows += 1;
    }

    fn merge(&mut self, other: &Accumulator) {
        self.bleu.add(&other.bleu);
        self.chrf.add(&other.chrf);
        self.rows += other.rows;
    }

    fn scores(&self, config: &ReportConfig) -> Scores {
        Scores { bleu: self.bleu.score(Smoothing::None), chrf: self.chrf.score(config.chrf.beta), rows: self.rows }
    }
}

struct RowStats<'a> {
    row: &'a EvalRow,
    reference: &'a str,
    bleu: BleuStats,
    chrf: ChrfStats,
}

fn row_stats<'a>(row: &'a EvalRow, reference: &'a str, config: &ReportConfig) -> RowStats<'a> {
    let bleu_config = BleuConfig {
        max_ngram_order: config.max_ngram_order,
        smoothing: Smoothing::None,
        tokenizer: Tokenizer::for_target(&row.direction.target),
    };
    RowStats {
        row,
        reference,
        bleu: BleuStats::sentence(&row.hypothesis, reference, &bleu_config),
        chrf: ChrfStats::sentence(&row.hypothesis, reference, &config.chrf),
    }
}

fn with_turn(mut spans: Vec<TagSpan>, turn_index: usize) -> Vec<TagSpan> {
    for s in &mut spans {
        s.turn_index = turn_index;
    }
    spans
}

fn document_tags(rows: &[&RowStats<'_>]) -> (TagCounts, TagCounts) {
    let mut formality = TagCounts::default();
    for r in rows.iter().filter(|r| r.row.direction.target.is_korean()) {
        let hyp = with_turn(tag_formality_ko(&r.row.hypothesis), r.row.turn_index);
        let reference = with_turn(tag_formality_ko(r.reference), r.row.turn_index);
        formality.add(TagCounts::compare(&hyp, &reference));
    }

    let mut cohesion = TagCounts::default();
    let mut by_target: BTreeMap<&LanguageCode, Vec<&RowStats<'_>>> = BTreeMap::new();
    for r in rows {
        by_target.entry(&r.row.direction.target).or_default().push(r);
    }
    for (_, mut side) in by_target {
        side.sort_by_key(|r| r.row.turn_index);
        let turn_of = |spans: Vec<TagSpan>| -> Vec<TagSpan> {
            spans
                .into_iter()
                .map(|mut s| {
                    s.turn_index = side[s.turn_index].row.turn_index;
                    s
                })
                .collect()
        };
        let hyp_texts: Vec<&str> = side.iter().map(|r| r.row.hypothesis.as_str()).collect();
        let ref_texts: Vec<&str> = side.iter().map(|r| r.reference).collect();
        let hyp = turn_of(tag_lexical_cohesion(&hyp_texts));
        let reference = turn_of(tag_lexical_cohesion(&ref_texts));
        cohesion.add(TagCounts::compare(&hyp, &reference));
    }
    (formality, cohesion)
}

/// Scores every row that has a reference. Rows without one are skipped.
pub fn corpus_report(rows: &[EvalRow], config: &ReportConfig) -> Result<MetricReport, MetricError> {
    let scored: Vec<RowStats<'_>> = rows
        .par_iter()
        .filter_map(|row| row.reference.as_deref().map(|r| row_stats(row, r, config)))
        .collect();
    if scored.is_empty() {
        return Err(MetricError::NoReferences);
    }

    let per_sentence = scored
        .iter()
        .map(|s| SentenceScore {
            doc_id: s.row.doc_id.clone(),
            turn_index: s.row.turn_index,
            direction: s.row.direction.clone(),
            bleu: s.bleu.score(config.sentence_smoothing),
            chrf: s.chrf.score(config.chrf.beta),
        })
        .collect();

    let mut documents: BTreeMap<&str, Vec<&RowStats<'_>>> = BTreeMap::new();
    for s in &scored {
        documents.entry(s.row.doc_id.as_str()).or_default().push(s);
    }
    let per_doc: Vec<(String, Accumulator, TagCounts, TagCounts)> = documents
        .par_iter()
        .map(|(doc_id, doc_rows)| {
            let mut acc = Accumulator::new(config);
            for r in doc_rows {
                acc.push(&r.bleu, &r.chrf);
            }
            let (formality, cohesion) = document_tags(doc_rows);
            (doc_id.to_string(), acc, formality, cohesion)
        })
        .collect();

    let mut corpus = Accumulator::new(config);
    let mut formality = TagCounts::default();
    let mut cohesion = TagCounts::default();
    let mut per_document = BTreeMap::new();
    for (doc_id, acc, f, c) in &per_doc {
        corpus.merge(acc);
        formality.add(*f);
        cohesion.add(*c);
        per_document.insert(doc_id.clone(), acc.scores(config));
    }

    let mut directions: BTreeMap<String, Accumulator> = BTreeMap::new();
    for s in &scored {
        directions
            .entry(s.row.direction.to_string())
            .or_insert_with(|| Accumulator::new(config))
            .push(&s.bleu, &s.chrf);
    }

    Ok(MetricReport {
        per_sentence,
        corpus: corpus.scores(config),
        per_document,
        per_direction: directions.iter().map(|(k, a)| (k.clone(), a.scores(config))).collect(),
        tagger: TaggerReport {
            formality: formality.prf(),
            lexical_cohesion: cohesion.prf(),
            formality_counts: formality,
            lexical_cohesion_counts: cohesion,
        },
        external: ExternalScores::default(),
    })
}

/// One line of a results table: a system or configuration in one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub configuration: String,
    pub direction: Option<Direction>,
    pub comet: Option<f64>,
    pub chrf: f64,
    pub bleu: f64,
    pub context_qe: Option<f64>,
}

impl TableRow {
    pub fn from_scores(configuration: &str, direction: Option<Direction>, scores: &Scores, external: &ExternalScores) -> Self {
        TableRow {
            configuration: configuration.to_string(),
            direction,
            comet: external.comet,
            chrf: scores.chrf,
            bleu: scores.bleu,
            context_qe: external.context_qe,
        }
    }
}

/// Plain-text table with columns Configuration, Direction, COMET, chrF,
/// BLEU, C-COMET-QE. Missing external scores print as `ext`; the context QE
/// cell stays blank for into-English rows without a value.
pub fn render_table(rows: &[TableRow]) -> String {
    let header = ["Configuration", "Direction", "COMET", "chrF", "BLEU", "C-COMET-QE"];
    let mut cells: Vec<[String; 6]> = vec![header.map(String::from)];
    for r in rows {
        let qe = match (r.context_qe, &r.direction) {
            (Some(v), _) => format!("{v:.3}"),
            (None, Some(d)) if d.target.as_str() == "en" => String::new(),
            (None, _) => "ext".into(),
        };
        cells.push([
            r.configuration.clone(),
            r.direction.as_ref().map(Direction::arrow).unwrap_or_else(|| "all".into()),
            r.comet.map(|v| format!("{v:.3}")).unwrap_or_else(|| "ext".into()),
            format!("{:.2}", r.chrf),
            format!("{:.2}", r.bleu),
            qe,
        ]);
    }
    let widths: Vec<usize> = (0..6).map(|c| cells.iter().map(|row| row[c].chars().count()).max().unwrap_or(0)).collect();
    let rule = format!("+{}+", widths.iter().map(|w| "-".repeat(w + 2)).collect::<Vec<_>>().join("+"));
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        if i <= 1 {
            out.push_str(&rule);
            out.push('\n');
        }
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, w))| {
                let pad = w - cell.chars().count();
                if c == 0 {
                    format!(" {cell}{} ", " ".repeat(pad))
                } else {
                    format!(" {}{cell} ", " ".repeat(pad))
                }
            })
            .collect();
        out.push('|');
        out.push_str(&line.join("|"));
        out.push_str("|\n");
    }
    out.push_str(&rule);
    out.push('\n');
    out
}
