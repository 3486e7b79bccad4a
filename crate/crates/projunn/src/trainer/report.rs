//! Run reporting: per-step CSV trajectories and a JSON summary with the
//! config echoed back.

use super::config::TrainConfig;
use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub unitarity_error: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps_run: usize,
    pub final_loss: f64,
    pub best_loss: f64,
    pub final_unitarity_error: f64,
    /// Test loss on held-out data after the last epoch (adding/copy).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_test_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_test_loss: Option<f64>,
    /// Random-unitary task: squared Frobenius distance to the target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_distance_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_distance_sq: Option<f64>,
    /// First step at which the distance fell 100x below its initial value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_to_hundredfold: Option<usize>,
    pub elapsed_s: f64,
    /// Set when a step failure aborted the run early; the records up to
    /// that point are still valid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
    pub config: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
}

impl RunReport {
    /// `step,loss,unitarity_error,wall_ms` rows. Deterministic given the
    /// config and seed, except for the wall_ms column.
    pub fn csv(&self) -> String {
        let mut out = String::from("step,loss,unitarity_error,wall_ms\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.3}\n",
                r.step, r.loss, r.unitarity_error, r.wall_ms
            ));
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut csv = std::fs::File::create(dir.join("train_log.csv"))?;
        csv.write_all(self.csv().as_bytes())?;
        let mut json = std::fs::File::create(dir.join("summary.json"))?;
        json.write_all(self.summary_json().as_bytes())?;
        json.write_all(b"\n")?;
        Ok(())
    }
}
