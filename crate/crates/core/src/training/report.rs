use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::temporal::ModelSpec;
use crate::training::LiveUpdateConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotStatus {
    Ok,
    /// No target positives in the test snapshot.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationMetrics {
    pub auprc: f64,
    pub mrr: f64,
    pub positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMetrics {
    pub trained_on: usize,
    pub tested_on: usize,
    pub status: SnapshotStatus,
    pub auprc: Option<f64>,
    pub mrr: Option<f64>,
    pub per_relation: BTreeMap<String, RelationMetrics>,
    pub epochs: usize,
    pub seconds: f64,
}

/// The resolved configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub live: LiveUpdateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub seed: u64,
    pub snapshots: Vec<SnapshotMetrics>,
    /// Means over snapshots with status `ok`; `None` when there are none.
    pub mean_auprc: Option<f64>,
    pub mean_mrr: Option<f64>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn new(config: RunConfig, snapshots: Vec<SnapshotMetrics>, warnings: Vec<String>) -> Self {
        let mean = |f: fn(&SnapshotMetrics) -> Option<f64>| {
            let vals: Vec<f64> = snapshots.iter().filter_map(f).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let mean_auprc = mean(|s| s.auprc);
        let mean_mrr = mean(|s| s.mrr);
        Self {
            seed: config.live.seed,
            config,
            snapshots,
            mean_auprc,
            mean_mrr,
            warnings,
        }
    }

    /// Copy with wall-clock fields zeroed, for byte-level comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for s in &mut r.snapshots {
            s.seconds = 0.0;
        }
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("report JSON: {e}")))
    }

    /// One row per test snapshot: `snapshot,auprc,mrr,epochs,seconds`.
    /// Skipped snapshots print `NA` metrics.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("snapshot,auprc,mrr,epochs,seconds\n");
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        for s in &self.snapshots {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.tested_on,
                fmt(s.auprc),
                fmt(s.mrr),
                s.epochs,
                s.seconds
            );
        }
        out
    }

    /// Writes `<stem>.json` and `<stem>.csv` atomically.
    pub fn write(&self, stem: &Path) -> Result<()> {
        crate::io::write_atomic(&stem.with_extension("json"), self.to_json().as_bytes())?;
        crate::io::write_atomic(&stem.with_extension("csv"), self.to_csv().as_bytes())
    }
}
