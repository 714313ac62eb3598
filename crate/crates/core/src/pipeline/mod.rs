//! Batch translation over a dataset, and the ablation harness built on it.

mod ablation;
pub mod synthetic;

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ablation::{run_ablation, AblationRun, AblationTable};

use crate::backend::{guarded_translate, BackendConfig, BackendError, ChatBackend, LanguageDetector, LanguageLabel};
use crate::context::{build_context, bundle_or_warning, ContextBundle, ContextError, Summarizer, SummaryCache, SummaryMode, HISTORY_WINDOW};
use crate::corpus::{ChatRecord, Conversation, Direction};
use crate::metrics::{corpus_report, render_table, EvalRow, ExternalScorer, ExternalSegment, MetricError, MetricReport, ReportConfig, TableRow};
use crate::prompting::{PromptError, PromptTemplate};

pub const TRANSLATIONS_FILE: &str = "translations.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const TABLE_FILE: &str = "table.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARIES_FILE: &str = "summaries.jsonl";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("backend failed on {doc_id} turn {turn_index}: {source} (partial output in {})", output_dir.display())]
    Backend {
        doc_id: String,
        turn_index: usize,
        #[source]
        source: BackendError,
        output_dir: PathBuf,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("summary for {doc_id} turn {turn_index} failed: {reason}")]
    Summary { doc_id: String, turn_index: usize, reason: String },
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
}

impl PipelineError {
    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        PipelineError::Io { path: path.to_path_buf(), message: err.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Two recent turns, the summary, and the detailed instruction.
    WithContext,
    /// No history and no summary.
    WithoutContext,
    /// Context kept; minimal instruction.
    WithoutPromptModification,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::WithContext, Variant::WithoutContext, Variant::WithoutPromptModification];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::WithContext => "with_context",
            Variant::WithoutContext => "without_context",
            Variant::WithoutPromptModification => "without_prompt_modification",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s.trim())
            .ok_or_else(|| format!("unknown variant {s:?}; expected with_context, without_context or without_prompt_modification"))
    }
}

/// Where prior-turn translations come from when building context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryMode {
    /// References when present, else the system's own output.
    #[default]
    TeacherForced,
    /// Always the system's own output.
    SelfForced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub variant: Variant,
    /// Only rows in this direction are translated. `None` translates all.
    pub direction: Option<Direction>,
    pub backend: BackendConfig,
    pub summary_mode: SummaryMode,
    pub history_mode: HistoryMode,
    pub output_dir: PathBuf,
    /// Label recorded in the manifest, e.g. `mock:ctx` or the model name.
    pub backend_label: String,
    pub domain_note: Option<String>,
    /// Reuse rows already present in the output directory.
    pub resume: bool,
    /// Summaries computed earlier, keyed by conversation prefix.
    pub summary_cache: Option<PathBuf>,
    #[serde(default)]
    pub comet: Option<ExternalScorer>,
    #[serde(default)]
    pub context_qe: Option<ExternalScorer>,
    pub report: ReportConfig,
}

impl RunConfig {
    pub fn new(variant: Variant, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            variant,
            direction: None,
            backend: BackendConfig::default(),
            summary_mode: SummaryMode::default(),
            history_mode: HistoryMode::default(),
            output_dir: output_dir.into(),
            backend_label: "unspecified".into(),
            domain_note: None,
            resume: false,
            summary_cache: None,
            comet: None,
            context_qe: None,
            report: ReportConfig::default(),
        }
    }

    pub fn template(&self) -> PromptTemplate {
        let mut template = match self.variant {
            Variant::WithoutPromptModification => PromptTemplate::minimal(),
            _ => PromptTemplate::default(),
        };
        if let Some(note) = &self.domain_note {
            template.domain_note = note.clone();
        }
        template
    }

    fn selects(&self, record: &ChatRecord) -> bool {
        self.direction.as_ref().is_none_or(|d| *d == record.direction())
    }
}

/// One output row: the input record plus its translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslatedRow {
    #[serde(flatten)]
    pub record: ChatRecord,
    pub translation: String,
    pub language: LanguageLabel,
    pub mismatched: bool,
    pub generations: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary_warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config: RunConfig,
    pub started_at: String,
    pub finished_at: String,
    pub complete: bool,
    pub expected_rows: usize,
    pub written_rows: usize,
    pub resumed_rows: usize,
    pub mismatched_rows: usize,
    pub summary_warnings: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub translations: PathBuf,
    pub rows: Vec<TranslatedRow>,
    /// `None` when no row has a reference.
    pub report: Option<MetricReport>,
    pub manifest: Manifest,
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), PipelineError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut file = fs::File::create(&tmp).map_err(|e| PipelineError::io(&tmp, e))?;
    file.write_all(contents).and_then(|_| file.sync_all()).map_err(|e| PipelineError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| PipelineError::io(path, e))
}

fn read_previous_rows(path: &Path) -> Result<HashMap<(String, usize), TranslatedRow>, PipelineError> {
    let mut out = HashMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let file = fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| PipelineError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: TranslatedRow = serde_json::from_str(&line).map_err(|e| PipelineError::io(path, e))?;
        out.insert((row.record.doc_id.clone(), row.record.turn_index), row);
    }
    Ok(out)
}

struct ConversationOutcome {
    rows: Vec<TranslatedRow>,
    resumed: usize,
    failure: Option<(usize, BackendError)>,
}

struct Worker<'a> {
    config: &'a RunConfig,
    template: PromptTemplate,
    backend: &'a dyn ChatBackend,
    summarizer: Summarizer<&'a dyn ChatBackend>,
    detector: LanguageDetector,
    previous: HashMap<(String, usize), TranslatedRow>,
    abort: AtomicBool,
}

impl Worker<'_> {
    fn translate_conversation(&self, conversation: &Conversation) -> Result<ConversationOutcome, PipelineError> {
        let mut outcome = ConversationOutcome { rows: Vec::new(), resumed: 0, failure: None };
        let mut outputs: Vec<Option<String>> = vec![None; conversation.len()];
        if self.abort.load(Ordering::SeqCst) {
            return Ok(outcome);
        }
        for (index, record) in conversation.turns.iter().enumerate() {
            if !self.config.selects(record) {
                continue;
            }
            let key = (conversation.doc_id.clone(), record.turn_index);
            if let Some(prev) = self.previous.get(&key).filter(|p| p.record.source == record.source) {
                outputs[index] = Some(prev.translation.clone());
                outcome.rows.push(prev.clone());
                outcome.resumed += 1;
                continue;
            }

            let (bundle, warning) = match self.config.variant {
                Variant::WithoutContext => (ContextBundle::empty(), None),
                _ => {
                    let translation_of = |i: usize| match self.config.history_mode {
                        HistoryMode::TeacherForced => {
                            conversation.turns[i].reference.clone().or_else(|| outputs[i].clone())
                        }
                        HistoryMode::SelfForced => outputs[i].clone().or_else(|| conversation.turns[i].reference.clone()),
                    };
                    match bundle_or_warning(build_context(conversation, index, translation_of, &self.summarizer)) {
                        Ok(v) => v,
                        Err(ContextError::Backend(e)) => {
                            outcome.failure = Some((record.turn_index, e));
                            return Ok(outcome);
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            };
            if let Some(w) = &warning {
                tracing::warn!(doc_id = %conversation.doc_id, turn = index, "summary unavailable: {w}");
            }
            let direction = record.direction();
            let package = self.template.package(&direction, &bundle, &record.source)?;
            match guarded_translate(self.backend, &package.messages(), &direction.target, &self.detector) {
                Ok(guarded) => {
                    outputs[index] = Some(guarded.result.text.clone());
                    outcome.rows.push(TranslatedRow {
                        record: record.clone(),
                        translation: guarded.result.text,
                        language: guarded.guess.label,
                        mismatched: guarded.mismatched,
                        generations: guarded.generations,
                        summary_warning: warning,
                    });
                }
                Err(e) => {
                    self.abort.store(true, Ordering::SeqCst);
                    outcome.failure = Some((record.turn_index, e));
                    return Ok(outcome);
                }
            }
        }
        Ok(outcome)
    }
}

/// Fills a summary cache with the summary every turn of `dataset` needs,
/// using references (or nothing) as prior-turn translations. Conversations
/// run in parallel on `parallelism` threads.
pub fn precompute_summaries(
    dataset: &[Conversation],
    mode: SummaryMode,
    backend: &dyn ChatBackend,
    parallelism: usize,
) -> Result<SummaryCache, PipelineError> {
    let summarizer = Summarizer::new(backend, mode);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
    pool.install(|| {
        dataset.par_iter().try_for_each(|conversation| {
            for index in HISTORY_WINDOW + 1..conversation.len() {
                let result = build_context(conversation, index, |i| conversation.turns[i].reference.clone(), &summarizer);
                match result {
                    Ok(_) => {}
                    Err(ContextError::SummaryUnavailable { reason, .. }) => {
                        return Err(PipelineError::Summary { doc_id: conversation.doc_id.clone(), turn_index: index, reason })
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            Ok(())
        })
    })?;
    Ok(summarizer.into_cache())
}

fn eval_rows(rows: &[TranslatedRow]) -> Vec<EvalRow> {
    rows.iter()
        .map(|r| EvalRow {
            doc_id: r.record.doc_id.clone(),
            turn_index: r.record.turn_index,
            direction: r.record.direction(),
            source: r.record.source.clone(),
            hypothesis: r.translation.clone(),
            reference: r.record.reference.clone(),
        })
        .collect()
}

fn external_segments(rows: &[TranslatedRow]) -> Vec<ExternalSegment> {
    rows.iter()
        .map(|r| ExternalSegment {
            src: r.record.source.clone(),
            mt: r.translation.clone(),
            reference: r.record.reference.clone(),
        })
        .collect()
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn to_json_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("artifacts serialize");
    out.push(b'\n');
    out
}

/// Translates every selected row of `dataset` and writes the run artifacts
/// under `config.output_dir`.
pub fn run_batch(dataset: &[Conversation], config: &RunConfig, backend: &dyn ChatBackend) -> Result<RunArtifacts, PipelineError> {
    if dataset.iter().all(|c| c.is_empty()) {
        return Err(PipelineError::EmptyDataset);
    }
    config.backend.validate().map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
    let started_at = now();
    let out_dir = &config.output_dir;
    fs::create_dir_all(out_dir).map_err(|e| PipelineError::io(out_dir, e))?;
    let translations = out_dir.join(TRANSLATIONS_FILE);

    let previous = if config.resume { read_previous_rows(&translations)? } else { HashMap::new() };
    let cache = match &config.summary_cache {
        Some(path) => SummaryCache::load_path(path)?,
        None if config.resume && out_dir.join(SUMMARIES_FILE).exists() => SummaryCache::load_path(&out_dir.join(SUMMARIES_FILE))?,
        None => SummaryCache::new(),
    };
    let worker = Worker {
        config,
        template: config.template(),
        backend,
        summarizer: Summarizer::with_cache(backend, config.summary_mode, cache),
        detector: LanguageDetector::new(),
        previous,
        abort: AtomicBool::new(false),
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.backend.parallelism)
        .build()
        .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
    let outcomes: Vec<ConversationOutcome> =
        pool.install(|| dataset.par_iter().map(|c| worker.translate_conversation(c)).collect::<Result<_, _>>())?;

    let expected_rows = dataset.iter().flat_map(|c| &c.turns).filter(|r| config.selects(r)).count();
    let mut rows = Vec::with_capacity(expected_rows);
    let mut resumed_rows = 0;
    let mut failure = None;
    for (conversation, outcome) in dataset.iter().zip(outcomes) {
        resumed_rows += outcome.resumed;
        rows.extend(outcome.rows);
        if failure.is_none() {
            failure = outcome.failure.map(|(turn, e)| (conversation.doc_id.clone(), turn, e));
        }
    }

    let mut jsonl = Vec::new();
    for row in &rows {
        serde_json::to_writer(&mut jsonl, row).expect("rows serialize");
        jsonl.push(b'\n');
    }
    write_atomic(&translations, &jsonl)?;
    let mut summaries = Vec::new();
    worker.summarizer.cache().save(&mut summaries).map_err(|e| PipelineError::io(out_dir, e))?;
    if !summaries.is_empty() {
        write_atomic(&out_dir.join(SUMMARIES_FILE), &summaries)?;
    }

    let complete = failure.is_none() && rows.len() == expected_rows;
    let mut report = None;
    if complete && rows.iter().any(|r| r.record.reference.is_some()) {
        let mut r = corpus_report(&eval_rows(&rows), &config.report)?;
        let segments = external_segments(&rows);
        if let Some(scorer) = &config.comet {
            r.external.comet = Some(scorer.score(&segments)?);
        }
        if let Some(scorer) = &config.context_qe {
            r.external.context_qe = Some(scorer.score(&segments)?);
        }
        write_atomic(&out_dir.join(REPORT_FILE), &to_json_pretty(&r))?;
        let table = render_table(&[TableRow::from_scores(config.variant.as_str(), config.direction.clone(), &r.corpus, &r.external)]);
        write_atomic(&out_dir.join(TABLE_FILE), table.as_bytes())?;
        report = Some(r);
    }

    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        started_at,
        finished_at: now(),
        complete,
        expected_rows,
        written_rows: rows.len(),
        resumed_rows,
        mismatched_rows: rows.iter().filter(|r| r.mismatched).count(),
        summary_warnings: rows.iter().filter(|r| r.summary_warning.is_some()).count(),
        error: failure.as_ref().map(|(doc, turn, e)| format!("{doc} turn {turn}: {e}")),
    };
    write_atomic(&out_dir.join(MANIFEST_FILE), &to_json_pretty(&manifest))?;

    if let Some((doc_id, turn_index, source)) = failure {
        return Err(PipelineError::Backend { doc_id, turn_index, source, output_dir: out_dir.clone() });
    }
    Ok(RunArtifacts { translations, rows, report, manifest })
}
