//! Summary and CSV persistence.
//!
//! `summary.json` carries the config echo, derived constants, results,
//! and one entry per asserted inequality; `generated_at` is the only field
//! allowed to differ between identical runs. Curves go to plain CSV so any
//! plotting tool can consume them.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::harness::config::ExperimentConfig;

/// Outcome of one asserted inequality.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    /// Stable name of the violated-or-held bound, e.g. `ito-residual-floor`.
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub kind: &'a str,
    pub passed: bool,
    pub checks: &'a [CheckResult],
    pub constants: serde_json::Value,
    pub results: serde_json::Value,
    pub config: &'a ExperimentConfig,
    pub generated_at: String,
}

pub fn write_summary(dir: &Path, summary: &Summary) -> Result<PathBuf> {
    let path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Write `name.csv` with a header row; numbers use the shortest
/// round-trip representation.
pub fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(&path, out)?;
    Ok(path)
}
