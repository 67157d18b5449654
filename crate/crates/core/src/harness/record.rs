//! Persisted experiment results. Every verdict carries the oracle value and
//! tolerance that produced it, so pass/fail is recomputable from the record
//! without re-simulation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{BatchSummary, RateFit};

use super::config::ExperimentConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub observed: f64,
    pub target: f64,
    /// Absolute tolerance applied to |observed - target|.
    pub tolerance: f64,
    /// Which oracle or rule produced the target.
    pub oracle: String,
    /// Purely informational verdicts never fail a run.
    #[serde(default)]
    pub informational: bool,
}

impl Verdict {
    pub fn check(
        name: impl Into<String>,
        observed: f64,
        target: f64,
        tolerance: f64,
        oracle: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            pass: (observed - target).abs() <= tolerance,
            observed,
            target,
            tolerance,
            oracle: oracle.into(),
            informational: false,
        }
    }

    /// A lower-bound check: pass iff observed > target.
    pub fn above(
        name: impl Into<String>,
        observed: f64,
        target: f64,
        oracle: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            pass: observed > target,
            observed,
            target,
            tolerance: 0.0,
            oracle: oracle.into(),
            informational: false,
        }
    }

    pub fn info(name: impl Into<String>, observed: f64, target: f64, oracle: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass: true,
            observed,
            target,
            tolerance: f64::NAN,
            oracle: oracle.into(),
            informational: true,
        }
    }
}

/// One ladder cell: parameters, batch summary, verdicts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub t: f64,
    pub radius: Option<f64>,
    /// Absent when the cell failed before producing samples.
    pub batch: Option<BatchSummary>,
    pub verdicts: Vec<Verdict>,
    #[serde(default)]
    pub complete: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub claim: String,
    pub config_digest: String,
    pub config: ExperimentConfig,
    pub version: String,
    pub master_seed: u64,
    pub cells: Vec<CellResult>,
    /// Experiment-level verdicts (rate fits, cross-cell comparisons).
    pub verdicts: Vec<Verdict>,
    pub rate_fits: Vec<RateFit>,
    pub wall_clock_s: f64,
    pub incomplete: bool,
}

impl ResultRecord {
    pub fn all_pass(&self) -> bool {
        !self.incomplete
            && self.cells.iter().all(|c| c.complete && c.verdicts.iter().all(|v| v.pass))
            && self.verdicts.iter().all(|v| v.pass)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Record(format!("serialize: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Record(format!("parse {path:?}: {e}")))
    }

    /// Equality up to wall-clock time (reproducibility checks).
    pub fn same_results(&self, other: &Self) -> bool {
        let a = serde_json::to_value(self).ok().map(strip_clock);
        let b = serde_json::to_value(other).ok().map(strip_clock);
        a == b && a.is_some()
    }
}

fn strip_clock(mut v: serde_json::Value) -> serde_json::Value {
    if let Some(obj) = v.as_object_mut() {
        obj.remove("wall_clock_s");
    }
    v
}
