//! Automatic translation metrics and reports.

mod bleu;
mod chrf;
mod external;
mod report;
mod tags;

use thiserror::Error;

pub use bleu::{bleu, BleuConfig, BleuStats, Smoothing, Tokenizer};
pub use chrf::{chrf, ChrfConfig, ChrfStats};
pub use external::{ExternalScorer, ExternalSegment};
pub use report::{
    corpus_report, render_table, EvalRow, ExternalScores, MetricReport, ReportConfig, Scores, SentenceScore, TableRow,
    TaggerReport,
};
pub use tags::{f1, prf_against_reference, tag_formality_ko, tag_lexical_cohesion, Phenomenon, Prf, TagCounts, TagSpan};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("no row has a reference translation")]
    NoReferences,
    #[error("invalid metric config: {0}")]
    InvalidConfig(String),
    #[error("external scorer: {0}")]
    External(String),
}

pub(crate) fn check_lengths(hypotheses: usize, references: usize) -> Result<(), MetricError> {
    if hypotheses != references {
        return Err(MetricError::LengthMismatch { hypotheses, references });
    }
    if hypotheses == 0 {
        return Err(MetricError::EmptyCorpus);
    }
    Ok(())
}
