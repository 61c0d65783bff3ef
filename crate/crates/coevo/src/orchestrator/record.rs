//! Run-log records and their file formats.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use coevo_core::grpo::StepSummary;
use coevo_core::rewards::ChallengerRewardInput;
use coevo_core::schedule::Phase;

use super::agents::PolicySummary;
use crate::error::{Error, Result};

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardStats {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl RewardStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in values {
            min = min.min(v);
            max = max.max(v);
        }
        Some(Self {
            n: values.len(),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min,
            max,
        })
    }
}

/// The plotted training-curve quantities for one step's questions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// 2-gram lexical diversity, percent.
    pub diversity: f64,
    /// Mean question length in words.
    pub mean_length: f64,
    /// One minus the mean success rate.
    pub difficulty: f64,
}

/// Curriculum admission counts at a refresh.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Admission {
    pub synthetic_generated: usize,
    pub synthetic_valid: usize,
    pub synthetic_admitted: usize,
    pub human_total: usize,
    pub human_admitted: usize,
}

/// Inputs and outputs of one challenger reward group, kept so every reward
/// can be recomputed from the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAudit {
    pub anchor_ids: Vec<String>,
    pub questions: Vec<String>,
    pub inputs: Vec<ChallengerRewardInput>,
    pub rewards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub schema_version: u32,
    pub step: u64,
    pub cycle: u64,
    pub phase: Phase,
    pub index_in_phase: u64,
    pub refresh: bool,
    /// Why no update happened, when none did.
    pub skipped: Option<String>,
    pub rewards: Option<RewardStats>,
    /// Solver steps: fraction of rollouts matching their training label.
    pub accuracy: Option<f64>,
    pub metrics: Option<StepMetrics>,
    pub admission: Option<Admission>,
    pub optimizer: Option<StepSummary>,
    pub policy: PolicySummary,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<GroupAudit>,
    /// Success rates of the items the solver trained on.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trained_p_hats: Vec<f64>,
    /// Seed of the step's root stream, for audit.
    pub rng_seed: u64,
}

impl StepRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// One row of the plotting export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub diversity: Option<f64>,
    pub mean_length: Option<f64>,
    pub difficulty: Option<f64>,
    pub mean_reward: Option<f64>,
}

impl From<&StepRecord> for MetricsRow {
    fn from(r: &StepRecord) -> Self {
        Self {
            step: r.step,
            diversity: r.metrics.map(|m| m.diversity),
            mean_length: r.metrics.map(|m| m.mean_length),
            difficulty: r.metrics.map(|m| m.difficulty),
            mean_reward: r.rewards.map(|s| s.mean),
        }
    }
}

/// Append-only writer for `run.jsonl` and `metrics.csv`. Every record is
/// flushed as soon as it is written, so a failed run leaves a usable
/// partial log.
pub struct LogWriter {
    jsonl: BufWriter<File>,
    csv: csv::Writer<File>,
    jsonl_path: PathBuf,
    csv_path: PathBuf,
}

impl LogWriter {
    /// Open both files; `append` continues existing ones (resume).
    pub fn open(dir: &Path, append: bool) -> Result<Self> {
        let jsonl_path = dir.join("run.jsonl");
        let csv_path = dir.join("metrics.csv");
        let open = |p: &Path| {
            let mut o = OpenOptions::new();
            o.create(true);
            if append {
                o.append(true);
            } else {
                o.write(true).truncate(true);
            }
            o.open(p).map_err(|e| Error::io(p, e))
        };
        let csv_exists = append && csv_path.metadata().is_ok_and(|m| m.len() > 0);
        let jsonl = BufWriter::new(open(&jsonl_path)?);
        let csv = csv::WriterBuilder::new()
            .has_headers(!csv_exists)
            .from_writer(open(&csv_path)?);
        Ok(Self {
            jsonl,
            csv,
            jsonl_path,
            csv_path,
        })
    }

    pub fn write(&mut self, record: &StepRecord) -> Result<()> {
        writeln!(self.jsonl, "{}", record.to_json_line())
            .map_err(|e| Error::io(&self.jsonl_path, e))?;
        self.jsonl
            .flush()
            .map_err(|e| Error::io(&self.jsonl_path, e))?;
        self.csv
            .serialize(MetricsRow::from(record))
            .map_err(|e| Error::io(&self.csv_path, std::io::Error::other(e)))?;
        self.csv.flush().map_err(|e| Error::io(&self.csv_path, e))
    }
}

pub fn read_run_log(path: impl AsRef<Path>) -> Result<Vec<StepRecord>> {
    crate::io::read_jsonl(path)
}
