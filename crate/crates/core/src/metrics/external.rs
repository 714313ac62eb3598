//! Hook for neural scorers (COMET and friends) run as external programs.
//!
//! The program receives one JSON object per line on stdin
//! (`{"src": .., "mt": .., "ref": ..}`) and prints either one number per
//! segment, one `{"score": x}` object per segment, or a final
//! `{"system_score": x}` line. Segment scores are averaged.

use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::MetricError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSegment {
    pub src: String,
    pub mt: String,
    #[serde(rename = "ref", skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalScorer {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl ExternalScorer {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        ExternalScorer { program: program.into(), args }
    }

    pub fn score(&self, segments: &[ExternalSegment]) -> Result<f64, MetricError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| MetricError::External(format!("cannot start `{}`: {e}", self.program)))?;

        let mut input = Vec::new();
        for seg in segments {
            serde_json::to_writer(&mut input, seg).map_err(|e| MetricError::External(e.to_string()))?;
            input.push(b'\n');
        }
        let mut stdin = child.stdin.take().expect("stdin is piped");
        let writer = std::thread::spawn(move || stdin.write_all(&input));
        let output = child.wait_with_output().map_err(|e| MetricError::External(e.to_string()))?;
        // a scorer that exits without reading stdin is fine
        let _ = writer.join();
        if !output.status.success() {
            return Err(MetricError::External(format!(
                "`{}` exited with {}: {}",
                self.program,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        parse_scores(&String::from_utf8_lossy(&output.stdout))
    }
}

pub(crate) fn parse_scores(stdout: &str) -> Result<f64, MetricError> {
    let mut segment_scores = Vec::new();
    for line in stdout.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Ok(x) = line.parse::<f64>() {
            segment_scores.push(x);
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|_| MetricError::External(format!("unrecognised scorer output line: {line}")))?;
        if let Some(x) = value.get("system_score").and_then(|v| v.as_f64()) {
            return Ok(x);
        }
        match value.get("score").and_then(|v| v.as_f64()) {
            Some(x) => segment_scores.push(x),
            None => return Err(MetricError::External(format!("unrecognised scorer output line: {line}"))),
        }
    }
    if segment_scores.is_empty() {
        return Err(MetricError::External("scorer printed no scores".into()));
    }
    Ok(segment_scores.iter().sum::<f64>() / segment_scores.len() as f64)
}
