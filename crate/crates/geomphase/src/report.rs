//! Run reports and their CSV/JSON serialization.
//!
//! The CSV table has one row per time sample with the fixed column set
//!
//! ```text
//! time, gamma_kinematic, gamma_generalized, gamma_uhlmann_discrete,
//! pt_res_generalized_max, pt_res_uhlmann, nu_1..nu_N, gamma_comp_1..gamma_comp_N
//! ```
//!
//! Methods that were not requested leave their cells empty. Floats are
//! written with 17 significant digits so a re-parse reproduces them bit
//! exactly; the JSON mirror carries the same numbers plus the final
//! per-method reports and integrator diagnostics.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ComponentOut {
    pub visibility: f64,
    pub phase: f64,
}

/// Final numbers for one requested method.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MethodOutcome {
    pub method: String,
    /// "ok" or "undefined" (vanishing overlap sum at the final time)
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_wrapped: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_unwrapped: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<ComponentOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pt_generalized_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pt_uhlmann_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunDiagnostics {
    pub trace_drift: f64,
    pub hermiticity_drift: f64,
    pub min_eigenvalue: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ancilla_generator_defect: Option<f64>,
}

/// Everything a scenario run produces.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    /// seconds since the Unix epoch at run time; excluded from comparisons
    pub timestamp: String,
    pub dimension: usize,
    pub rank: usize,
    pub steps: usize,
    pub t_final: f64,
    pub ancilla_policy: String,
    pub methods: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub finals: Vec<MethodOutcome>,
    pub diagnostics: RunDiagnostics,
}

impl RunReport {
    /// The report with the timestamp blanked, for byte-level comparisons.
    pub fn without_timestamp(&self) -> RunReport {
        let mut r = self.clone();
        r.timestamp = String::new();
        r
    }
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_csv_string(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(&report.columns.join(","));
    out.push('\n');
    for row in &report.rows {
        let cells: Vec<String> = row
            .iter()
            .map(|cell| cell.map(fmt17).unwrap_or_default())
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn emit_csv(report: &RunReport, path: &Path) -> Result<()> {
    write_file(path, to_csv_string(report).as_bytes())
}

pub fn to_json_string(report: &RunReport) -> String {
    serde_json::to_string_pretty(report).expect("report serialization is infallible")
}

pub fn emit_json(report: &RunReport, path: &Path) -> Result<()> {
    write_file(path, to_json_string(report).as_bytes())
}

pub fn read_json(text: &str) -> Result<RunReport> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_json_file(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    read_json(&text)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    f.write_all(bytes).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidValue {
                field: "format".into(),
                message: format!("unknown format `{other}` (expected csv, json)"),
            }),
        }
    }
}

/// Write the report in the requested format.
pub fn emit_report(report: &RunReport, format: ReportFormat, path: &Path) -> Result<()> {
    match format {
        ReportFormat::Csv => emit_csv(report, path),
        ReportFormat::Json => emit_json(report, path),
    }
}
