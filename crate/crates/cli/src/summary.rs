use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::SCHEMA_VERSION;

pub const SUMMARY_FILE: &str = "summary.json";

/// One checked estimate or identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// `<index>:<kind>` of the experiment that produced the row.
    pub experiment: String,
    pub check: String,
    /// Short reference tag of the estimate, e.g. `Eq130`.
    pub reference: String,
    pub predicted: Option<f64>,
    pub measured: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentFailure {
    pub experiment: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub seed: u64,
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<ExperimentFailure>,
}

impl Summary {
    pub fn new(seed: u64) -> Self {
        Self { schema_version: SCHEMA_VERSION, seed, rows: Vec::new(), failures: Vec::new() }
    }

    pub fn all_pass(&self) -> bool {
        self.failures.is_empty() && self.rows.iter().all(|r| r.pass)
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(SUMMARY_FILE), json + "\n")
    }

    pub fn read(dir: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(dir.join(SUMMARY_FILE))?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }

    /// Fixed-width table, one line per row, failures last.
    pub fn render(&self) -> String {
        let num = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4e}"));
        let mut s =
            format!("{:<20} {:<54} {:<10} {:>12} {:>12}  result\n", "experiment", "check", "reference", "predicted", "measured");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<20} {:<54} {:<10} {:>12} {:>12}  {}",
                r.experiment,
                r.check,
                r.reference,
                num(r.predicted),
                num(r.measured),
                if r.pass { "pass" } else { "FAIL" }
            );
        }
        for f in &self.failures {
            let _ = writeln!(s, "{:<20} error: {}", f.experiment, f.error);
        }
        let passed = self.rows.iter().filter(|r| r.pass).count();
        let _ = writeln!(s, "{passed}/{} rows pass, {} experiment errors", self.rows.len(), self.failures.len());
        s
    }
}
