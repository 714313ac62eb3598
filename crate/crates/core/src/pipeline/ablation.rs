use serde::{Deserialize, Serialize};

use super::{run_batch, write_atomic, PipelineError, RunConfig, Variant};
use crate::backend::ChatBackend;
use crate::corpus::{Conversation, Direction};
use crate::metrics::{render_table, ExternalScores, Scores, TableRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub variant: Variant,
    pub direction: Option<Direction>,
    pub scores: Scores,
    pub external: ExternalScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub runs: Vec<AblationRun>,
}

impl AblationTable {
    pub fn rows(&self) -> Vec<TableRow> {
        self.runs
            .iter()
            .map(|r| TableRow::from_scores(r.variant.as_str(), r.direction.clone(), &r.scores, &r.external))
            .collect()
    }

    pub fn render(&self) -> String {
        render_table(&self.rows())
    }

    pub fn get(&self, variant: Variant, direction: Option<&Direction>) -> Option<&AblationRun> {
        self.runs.iter().find(|r| r.variant == variant && r.direction.as_ref() == direction)
    }
}

/// Runs each variant in each direction, one output subdirectory per run
/// (`<output_dir>/<variant>/<direction>`), and writes `ablation.json` and
/// `table.txt` to `base.output_dir`. A `None` direction pools all rows into
/// one run (subdirectory `all`).
pub fn run_ablation(
    dataset: &[Conversation],
    base: &RunConfig,
    variants: &[Variant],
    directions: &[Option<Direction>],
    backend: &dyn ChatBackend,
) -> Result<AblationTable, PipelineError> {
    if variants.is_empty() || directions.is_empty() {
        return Err(PipelineError::InvalidConfig("ablation needs at least one variant and one direction".into()));
    }
    let mut runs = Vec::new();
    for &variant in variants {
        for direction in directions {
            let mut config = base.clone();
            config.variant = variant;
            config.direction = direction.clone();
            let subdir = direction.as_ref().map_or_else(|| "all".to_string(), Direction::to_string);
            config.output_dir = base.output_dir.join(variant.as_str()).join(subdir);
            let artifacts = run_batch(dataset, &config, backend)?;
            let report = artifacts.report.ok_or(PipelineError::Metric(crate::metrics::MetricError::NoReferences))?;
            runs.push(AblationRun { variant, direction: direction.clone(), scores: report.corpus, external: report.external });
        }
    }
    let table = AblationTable { runs };
    let mut json = serde_json::to_vec_pretty(&table).expect("table serializes");
    json.push(b'\n');
    write_atomic(&base.output_dir.join("ablation.json"), &json)?;
    write_atomic(&base.output_dir.join(super::TABLE_FILE), table.render().as_bytes())?;
    Ok(table)
}
