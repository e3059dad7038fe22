use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::loss::LossBreakdown;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub steps_run: usize,
    pub initial: f64,
    #[serde(rename = "final")]
    pub last: f64,
    pub initial_variance: Vec<f64>,
    pub final_variance: Vec<f64>,
    /// Total loss per step.
    pub history: Vec<f64>,
}

impl LossSummary {
    pub fn from_history(history: &[LossBreakdown]) -> Option<LossSummary> {
        let (first, last) = (history.first()?, history.last()?);
        Some(LossSummary {
            steps_run: history.len(),
            initial: first.total,
            last: last.total,
            initial_variance: first.per_filter_variance.clone(),
            final_variance: last.per_filter_variance.clone(),
            history: history.iter().map(|l| l.total).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub alpha: Option<f64>,
    pub detections_per_filter: Vec<usize>,
    pub tp_rate: Option<f64>,
    pub fp_rate: Option<f64>,
    pub fn_rate: Option<f64>,
}

/// Written next to the outputs of every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub phases: Vec<Phase>,
    pub total_seconds: f64,
    pub loss: Option<LossSummary>,
    pub detection: Option<DetectionSummary>,
    pub manifest: Vec<PathBuf>,
}

/// Accumulates phase timings and output files while a subcommand runs.
pub struct Recorder {
    command: String,
    seed: u64,
    pub config: serde_json::Value,
    phases: Vec<Phase>,
    manifest: Vec<PathBuf>,
    pub loss: Option<LossSummary>,
    pub detection: Option<DetectionSummary>,
}

impl Recorder {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Recorder {
        Recorder {
            command: command.to_string(),
            seed,
            config,
            phases: Vec::new(),
            manifest: Vec::new(),
            loss: None,
            detection: None,
        }
    }

    /// Run `f` and record its wall-clock time under `name`.
    pub fn phase<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.phases.push(Phase {
            name: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.manifest.push(path.into());
    }

    /// Write `<out_dir>/<command>_report.json` and return the report.
    pub fn finish(mut self, out_dir: &Path) -> Result<RunReport> {
        let path = out_dir.join(format!("{}_report.json", self.command));
        self.manifest.push(path.clone());
        let report = RunReport {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            config: self.config,
            total_seconds: self.phases.iter().map(|p| p.seconds).sum(),
            phases: self.phases,
            loss: self.loss,
            detection: self.detection,
            manifest: self.manifest,
        };
        std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
        Ok(report)
    }
}
