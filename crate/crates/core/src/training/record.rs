use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SppError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

/// Final metrics of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub train_loss: f64,
    pub eval_loss: Option<f64>,
    /// Base-weight nonzeros before merging adapters.
    pub nnz_before: usize,
    /// Nonzeros after merging (plain merge, no re-pruning).
    pub nnz_after: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    steps: Vec<StepRecord>,
    summary: Option<RunSummary>,
}

impl RunRecord {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a step. Step indices must strictly increase.
    pub fn push(&mut self, rec: StepRecord) -> Result<()> {
        if let Some(last) = self.steps.last() {
            if rec.step <= last.step {
                return Err(SppError::State(format!(
                    "step {} recorded after step {}",
                    rec.step, last.step
                )));
            }
        }
        self.steps.push(rec);
        Ok(())
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn summary(&self) -> Option<&RunSummary> {
        self.summary.as_ref()
    }

    pub fn set_summary(&mut self, summary: RunSummary) {
        self.summary = Some(summary);
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.steps.last().map(|s| s.loss)
    }

    /// `step,lr,loss` lines with a header. Floats use the shortest
    /// round-tripping representation, so equal runs give equal bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,lr,loss\n");
        for s in &self.steps {
            let _ = writeln!(out, "{},{},{}", s.step, s.lr, s.loss);
        }
        out
    }

    pub fn summary_json(&self) -> Result<String> {
        let summary = self
            .summary
            .as_ref()
            .ok_or_else(|| SppError::State("run has no summary yet".into()))?;
        serde_json::to_string_pretty(summary).map_err(|e| SppError::Meta(e.to_string()))
    }
}
