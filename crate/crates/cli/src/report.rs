//! Report assembly and output files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use harnack_lab::approx::SweepResult;
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub id: String,
    pub anchor: String,
    /// Worst normalized residual over all samples.
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// `[x..., t]` of the worst sample, when the check is pointwise.
    pub point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
    /// Derived quantities reported alongside the checks, such as fitted constants.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub suites: Vec<SuiteReport>,
    pub pass: bool,
    pub elapsed_ms: u64,
    /// Sweep tables, written as CSV rather than into the JSON.
    #[serde(skip)]
    pub sweeps: Vec<(String, SweepResult)>,
}

impl Report {
    pub fn failing(&self) -> impl Iterator<Item = &CheckRecord> {
        self.suites
            .iter()
            .flat_map(|s| s.checks.iter())
            .filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for suite in &self.suites {
            let verdict = if suite.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "[{verdict}] {}", suite.name);
            for c in &suite.checks {
                let mark = if c.pass { "ok  " } else { "FAIL" };
                let _ = writeln!(
                    out,
                    "  {mark} {:<36} {:>10.3e} <= {:<8.1e} {}",
                    c.id, c.residual, c.tolerance, c.anchor
                );
            }
            for (k, v) in &suite.notes {
                let _ = writeln!(out, "  note {k} = {v:.6e}");
            }
        }
        let failing: Vec<_> = self.failing().collect();
        if failing.is_empty() {
            let _ = writeln!(out, "all checks passed");
        } else {
            let _ = writeln!(out, "{} failing check(s):", failing.len());
            for c in failing {
                let _ = writeln!(out, "  {} [{}] residual {:.3e}", c.id, c.anchor, c.residual);
            }
        }
        out
    }

    /// Writes the report in `format` plus one CSV per sweep into `dir`.
    pub fn write(&self, dir: &Path, format: Format) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        match format {
            Format::Json => std::fs::write(dir.join("report.json"), self.to_json()).map_err(io)?,
            Format::Text => std::fs::write(dir.join("report.txt"), self.summary()).map_err(io)?,
        }
        for (name, sweep) in &self.sweeps {
            write_sweep_csv(&dir.join(format!("{name}.csv")), sweep)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct CsvRow {
    epsilon: f64,
    delta: f64,
    conn_err: f64,
    curv_form_err: f64,
    gamma000: f64,
    target_gap: f64,
}

pub fn write_sweep_csv(path: &Path, sweep: &SweepResult) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in &sweep.rows {
        w.serialize(CsvRow {
            epsilon: r.epsilon,
            delta: r.delta,
            conn_err: r.conn_err,
            curv_form_err: r.curv_form_err,
            gamma000: r.gamma000,
            target_gap: r.target_gap,
        })
        .map_err(err)?;
    }
    w.flush()
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
