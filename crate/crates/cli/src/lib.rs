//! `chatmt` subcommands.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chatmt_core::backend::{BackendConfig, ChatBackend, HttpBackend, MockBackend};
use chatmt_core::context::SummaryMode;
use chatmt_core::corpus::{assemble_conversations, read_records_from_path, split_stats, ChatRecord, Conversation, Direction};
use chatmt_core::metrics::{corpus_report, render_table, EvalRow, ExternalScorer, MetricReport, ReportConfig, TableRow};
use chatmt_core::pipeline::{precompute_summaries, run_ablation, run_batch, synthetic, HistoryMode, PipelineError, RunConfig, Variant};
use chatmt_service::{ManagerConfig, SessionManager};
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

const SCHEMA_HELP: &str = "expected JSONL, one object per line with string fields \
source_language, target_language, source, doc_id, sender (customer|agent) and optional reference, client_id";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Backend(_) => 2,
            CliError::Validation(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Backend { .. } | PipelineError::Summary { .. } => CliError::Backend(e.to_string()),
            PipelineError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "chatmt", version, about = "Context-aware chat translation: batch runs, evaluation, ablation and a live session service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    /// Returns the source text unchanged.
    #[value(name = "mock:echo")]
    MockEcho,
    /// Context-aware translator for the bundled synthetic corpus.
    #[value(name = "mock:ctx")]
    MockCtx,
    /// Placeholder text in the target language.
    #[value(name = "mock:pseudo")]
    MockPseudo,
    /// OpenAI-compatible chat-completions endpoint.
    #[value(name = "openai")]
    Openai,
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum, default_value = "mock:echo")]
    pub backend: BackendKind,
    /// TOML file with endpoint, model_name, timeout_secs, max_retries, parallelism, ...
    #[arg(long)]
    pub backend_config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SummaryModeArg {
    PerPrefix,
    Incremental,
}

impl From<SummaryModeArg> for SummaryMode {
    fn from(m: SummaryModeArg) -> Self {
        match m {
            SummaryModeArg::PerPrefix => SummaryMode::PerPrefix,
            SummaryModeArg::Incremental => SummaryMode::Incremental,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HistoryArg {
    TeacherForced,
    SelfForced,
}

impl From<HistoryArg> for HistoryMode {
    fn from(h: HistoryArg) -> Self {
        match h {
            HistoryArg::TeacherForced => HistoryMode::TeacherForced,
            HistoryArg::SelfForced => HistoryMode::SelfForced,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a dataset file and print its statistics.
    Ingest {
        /// Dataset file. Defaults to `<data-dir>/<split>.jsonl`.
        path: Option<PathBuf>,
        #[arg(long, default_value = "validation")]
        split: String,
        #[arg(long, env = "CHATMT_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
    },
    /// Precompute the summary every turn needs and write them as a cache file.
    Summarize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "per-prefix")]
        mode: SummaryModeArg,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Translate a dataset and write translations, report, table and manifest.
    Translate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long, default_value = "with_context")]
        variant: Variant,
        /// Only translate rows in this direction, e.g. en-ko.
        #[arg(long)]
        direction: Option<Direction>,
        #[arg(long, value_enum, default_value = "teacher-forced")]
        history: HistoryArg,
        #[arg(long, value_enum, default_value = "per-prefix")]
        summary_mode: SummaryModeArg,
        /// Summary cache written by `summarize`.
        #[arg(long)]
        summary_cache: Option<PathBuf>,
        /// Keep rows already in the output directory.
        #[arg(long)]
        resume: bool,
        /// Replaces the domain bullet of the instruction.
        #[arg(long)]
        domain_note: Option<String>,
        /// Command that scores JSONL segments on stdin, e.g. a COMET wrapper.
        #[arg(long)]
        comet_cmd: Option<String>,
        #[arg(long)]
        qe_cmd: Option<String>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Score hypotheses against references.
    Evaluate {
        /// JSONL rows; the hypothesis is read from translation, hypothesis,
        /// mt or reference, in that order.
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Also write the full report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run several variants and print a comparison table.
    Ablate {
        /// Dataset file. Defaults to the bundled synthetic corpus.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "runs/ablation")]
        output_dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "with_context,without_context,without_prompt_modification")]
        variants: Vec<Variant>,
        /// One row per variant and direction. Without it, one pooled row per variant.
        #[arg(long, value_delimiter = ',')]
        directions: Vec<Direction>,
        #[arg(long, value_enum, default_value = "teacher-forced")]
        history: HistoryArg,
        #[arg(long, value_enum, default_value = "per-prefix")]
        summary_mode: SummaryModeArg,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Run the session HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "sessions")]
        data_dir: PathBuf,
        #[arg(long, value_enum, default_value = "incremental")]
        summary_mode: SummaryModeArg,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

fn load_backend(args: &BackendArgs) -> Result<(Arc<dyn ChatBackend>, BackendConfig, String), CliError> {
    let config = match &args.backend_config {
        Some(path) => BackendConfig::load(path).map_err(|e| CliError::Validation(e.to_string()))?,
        None => BackendConfig::default(),
    };
    let (backend, label): (Arc<dyn ChatBackend>, String) = match args.backend {
        BackendKind::MockEcho => (Arc::new(MockBackend::echo()), "mock:echo".into()),
        BackendKind::MockCtx => (Arc::new(synthetic::context_aware_backend()), "mock:ctx".into()),
        BackendKind::MockPseudo => (Arc::new(MockBackend::pseudo()), "mock:pseudo".into()),
        BackendKind::Openai => {
            let http = HttpBackend::new(config.clone()).map_err(|e| CliError::Validation(e.to_string()))?;
            (Arc::new(http), format!("openai:{}", config.model_name))
        }
    };
    Ok((backend, config, label))
}

fn load_dataset(path: &Path) -> Result<Vec<Conversation>, CliError> {
    let records = read_records_from_path(path).map_err(|e| CliError::Validation(format!("{}: {e}\n{SCHEMA_HELP}", path.display())))?;
    if records.is_empty() {
        return Err(CliError::Validation(format!("{}: no records\n{SCHEMA_HELP}", path.display())));
    }
    Ok(assemble_conversations(records))
}

fn scorer(cmd: &Option<String>) -> Result<Option<ExternalScorer>, CliError> {
    let Some(cmd) = cmd else { return Ok(None) };
    let mut parts = cmd.split_whitespace().map(str::to_string);
    let program = parts.next().ok_or_else(|| CliError::Validation("empty scorer command".into()))?;
    Ok(Some(ExternalScorer::new(program, parts.collect())))
}

fn write_line(out: &mut dyn Write, line: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::Io(e.to_string()))
}

/// Hypothesis text of an evaluation row.
fn hypothesis_of(record: &ChatRecord) -> Option<String> {
    ["translation", "hypothesis", "mt"]
        .iter()
        .find_map(|k| record.extra.get(*k).and_then(|v| v.as_str()).map(str::to_string))
        .or_else(|| record.reference.clone())
}

fn evaluate(hyp: &Path, reference: &Path) -> Result<MetricReport, CliError> {
    let hyps = load_dataset(hyp)?;
    let refs = load_dataset(reference)?;
    let mut by_key: HashMap<(String, usize), String> = HashMap::new();
    for conv in &hyps {
        for r in &conv.turns {
            let text = hypothesis_of(r)
                .ok_or_else(|| CliError::Validation(format!("{}: {} turn {} has no hypothesis field", hyp.display(), r.doc_id, r.turn_index)))?;
            by_key.insert((r.doc_id.clone(), r.turn_index), text);
        }
    }
    let mut rows = Vec::new();
    for conv in &refs {
        for r in &conv.turns {
            let hypothesis = by_key
                .remove(&(r.doc_id.clone(), r.turn_index))
                .ok_or_else(|| CliError::Validation(format!("no hypothesis for {} turn {}", r.doc_id, r.turn_index)))?;
            rows.push(EvalRow {
                doc_id: r.doc_id.clone(),
                turn_index: r.turn_index,
                direction: r.direction(),
                source: r.source.clone(),
                hypothesis,
                reference: r.reference.clone(),
            });
        }
    }
    if !by_key.is_empty() {
        return Err(CliError::Validation(format!("{} hypothesis rows have no matching reference row", by_key.len())));
    }
    corpus_report(&rows, &ReportConfig::default()).map_err(|e| CliError::Validation(e.to_string()))
}

fn print_report(out: &mut dyn Write, report: &MetricReport) -> Result<(), CliError> {
    let c = &report.corpus;
    write_line(out, format!("rows={} BLEU={:.2} chrF={:.2}", c.rows, c.bleu, c.chrf))?;
    for (direction, s) in &report.per_direction {
        write_line(out, format!("direction={direction} rows={} BLEU={:.2} chrF={:.2}", s.rows, s.bleu, s.chrf))?;
    }
    let t = &report.tagger;
    write_line(out, format!("formality P={:.1} R={:.1} F1={:.1}", t.formality.precision, t.formality.recall, t.formality.f1))?;
    write_line(
        out,
        format!(
            "lexical_cohesion P={:.1} R={:.1} F1={:.1}",
            t.lexical_cohesion.precision, t.lexical_cohesion.recall, t.lexical_cohesion.f1
        ),
    )
}

fn write_json(path: &Path, value: &MetricReport) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { path, split, data_dir } => {
            let path = path.unwrap_or_else(|| data_dir.join(format!("{split}.jsonl")));
            let conversations = load_dataset(&path)?;
            write_line(out, split_stats(&conversations, &split))
        }
        Command::Summarize { input, output, mode, backend } => {
            let dataset = load_dataset(&input)?;
            let (backend, config, _) = load_backend(&backend)?;
            let cache = precompute_summaries(&dataset, mode.into(), &*backend, config.parallelism)?;
            let file = fs::File::create(&output).map_err(|e| io_err(&output, e))?;
            cache.save(BufWriter::new(file)).map_err(|e| io_err(&output, e))?;
            write_line(out, format!("summaries={} output={}", cache.len(), output.display()))
        }
        Command::Translate {
            input,
            output_dir,
            variant,
            direction,
            history,
            summary_mode,
            summary_cache,
            resume,
            domain_note,
            comet_cmd,
            qe_cmd,
            backend,
        } => {
            let dataset = load_dataset(&input)?;
            let (backend, backend_config, label) = load_backend(&backend)?;
            let mut config = RunConfig::new(variant, output_dir);
            config.direction = direction;
            config.backend = backend_config;
            config.backend_label = label;
            config.history_mode = history.into();
            config.summary_mode = summary_mode.into();
            config.summary_cache = summary_cache;
            config.resume = resume;
            config.domain_note = domain_note;
            config.comet = scorer(&comet_cmd)?;
            config.context_qe = scorer(&qe_cmd)?;
            let artifacts = run_batch(&dataset, &config, &*backend)?;
            write_line(out, format!("rows={} translations={}", artifacts.rows.len(), artifacts.translations.display()))?;
            if let Some(report) = &artifacts.report {
                print_report(out, report)?;
                let row = TableRow::from_scores(variant.as_str(), config.direction.clone(), &report.corpus, &report.external);
                write!(out, "{}", render_table(&[row])).map_err(|e| CliError::Io(e.to_string()))?;
            }
            Ok(())
        }
        Command::Evaluate { hyp, reference, report } => {
            let result = evaluate(&hyp, &reference)?;
            print_report(out, &result)?;
            if let Some(path) = report {
                write_json(&path, &result)?;
            }
            Ok(())
        }
        Command::Ablate { input, output_dir, variants, directions, history, summary_mode, backend } => {
            let dataset = match &input {
                Some(path) => load_dataset(path)?,
                None => assemble_conversations(synthetic::context_corpus()),
            };
            let (backend, backend_config, label) = load_backend(&backend)?;
            let mut base = RunConfig::new(Variant::WithContext, output_dir);
            base.backend = backend_config;
            base.backend_label = label;
            base.history_mode = history.into();
            base.summary_mode = summary_mode.into();
            let directions: Vec<Option<Direction>> =
                if directions.is_empty() { vec![None] } else { directions.into_iter().map(Some).collect() };
            let table = run_ablation(&dataset, &base, &variants, &directions, &*backend)?;
            write!(out, "{}", table.render()).map_err(|e| CliError::Io(e.to_string()))
        }
        Command::Serve { bind, port, data_dir, summary_mode, backend } => {
            let (backend, _, label) = load_backend(&backend)?;
            let addr: SocketAddr =
                format!("{bind}:{port}").parse().map_err(|e| CliError::Validation(format!("bad address {bind}:{port}: {e}")))?;
            let config = ManagerConfig { summary_mode: summary_mode.into(), ..Default::default() };
            let manager = SessionManager::open(&data_dir, backend, config).map_err(|e| CliError::Validation(e.to_string()))?;
            write_line(out, format!("serving on http://{addr} backend={label} data_dir={}", data_dir.display()))?;
            out.flush().map_err(|e| CliError::Io(e.to_string()))?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
            runtime.block_on(chatmt_service::serve(Arc::new(manager), addr)).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}
