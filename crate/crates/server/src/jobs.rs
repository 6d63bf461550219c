//! Experiment jobs: what was asked for, where it stands, what it produced.

use chrono::{DateTime, Utc};
use pragmachat_core::experiment::{
    compare, compare_run, emit_comparison, emit_results, load_fixture, Arm, Comparison,
    ExperimentConfig, ExperimentError, OutputFormat, RunRecord,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Pending,
    Running,
    Done,
    Failed,
}

/// Published (or previously emitted) results to analyze instead of running.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub without_csv: String,
    pub with_csv: String,
    #[serde(default)]
    pub tie_epsilon: f64,
    #[serde(default = "default_rounding")]
    pub rounding: usize,
}

fn default_rounding() -> usize {
    2
}

/// Body of `POST /experiments`: `{"config": {...}}` or `{"fixture": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobSpec {
    Config(ExperimentConfig),
    Fixture(FixtureSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentJob {
    pub id: String,
    #[serde(flatten)]
    pub spec: JobSpec,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
}

impl ExperimentJob {
    pub fn new(id: String, spec: JobSpec) -> Self {
        ExperimentJob {
            id,
            spec,
            status: JobStatus::Pending,
            error: None,
            created_at: Utc::now(),
            started_at: None,
            finished_at: None,
        }
    }

    /// Moves forward only: pending → running → done | failed, or straight
    /// from pending to failed.
    pub fn advance(&mut self, next: JobStatus) -> bool {
        use JobStatus::*;
        let ok = matches!(
            (self.status, next),
            (Pending, Running) | (Running, Done) | (Running, Failed) | (Pending, Failed)
        );
        if ok {
            self.status = next;
            match next {
                Running => self.started_at = Some(Utc::now()),
                Done | Failed => self.finished_at = Some(Utc::now()),
                Pending => {}
            }
        }
        ok
    }
}

/// Everything a finished job writes next to its `job.json`.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub records: Vec<RunRecord>,
    pub comparison: Option<Comparison>,
    pub rounding: usize,
}

impl Artifacts {
    /// `(file name, bytes)` pairs.
    pub fn files(&self) -> Vec<(&'static str, Vec<u8>)> {
        let mut out = vec![
            ("results.csv", emit_results(&self.records, self.rounding, OutputFormat::Csv)),
            ("results.md", emit_results(&self.records, self.rounding, OutputFormat::Markdown)),
        ];
        if let Some(c) = &self.comparison {
            out.push(("comparison.md", emit_comparison(c, OutputFormat::Markdown)));
            out.push(("comparison.csv", emit_comparison(c, OutputFormat::Csv)));
        }
        out
    }
}

/// Analyzes two result tables; no backend involved.
pub fn analyze_fixture(spec: &FixtureSpec) -> Result<Artifacts, ExperimentError> {
    let without = load_fixture(spec.without_csv.as_bytes())?;
    let with = load_fixture(spec.with_csv.as_bytes())?;
    let comparison = compare(&without, &with, spec.tie_epsilon)?;
    Ok(Artifacts {
        records: without.into_iter().chain(with).collect(),
        comparison: Some(comparison),
        rounding: spec.rounding,
    })
}

/// Packages run output; the comparison needs both arms.
pub fn run_artifacts(
    config: &ExperimentConfig,
    records: Vec<RunRecord>,
) -> Result<Artifacts, ExperimentError> {
    let both = Arm::ALL.iter().all(|a| config.arms.contains(a));
    let comparison = if both {
        Some(compare_run(&records, config.tie_epsilon)?)
    } else {
        None
    };
    Ok(Artifacts {
        records,
        comparison,
        rounding: config.rounding,
    })
}
