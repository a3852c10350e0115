//! Report emission: one row per experiment cell, as CSV or JSON.
//!
//! CSV is written with plain `{}` formatting (shortest round-trippable
//! float form), so equal in-memory results always serialize to equal
//! bytes regardless of worker count or platform.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::experiment::KSResult;
use crate::{io_err, HarnessError, Result};

pub const CSV_HEADER: &str = "n,d,delta_hat,se,argmax_t,bound_total,bound_tail,bound_mu1_term,bound_mu3_term,corollary_value,trunc_event_rate,in_band_rate";

/// Flat per-cell record matching the CSV column set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    pub d: usize,
    pub delta_hat: f64,
    pub se: f64,
    pub argmax_t: f64,
    pub bound_total: f64,
    pub bound_tail: f64,
    pub bound_mu1_term: f64,
    pub bound_mu3_term: f64,
    pub corollary_value: f64,
    pub trunc_event_rate: f64,
    pub in_band_rate: f64,
}

impl From<&KSResult> for ReportRow {
    fn from(cell: &KSResult) -> Self {
        ReportRow {
            n: cell.n,
            d: cell.d,
            delta_hat: cell.delta_hat,
            se: cell.se,
            argmax_t: cell.argmax_t,
            bound_total: cell.bound_report.total_theorem1,
            bound_tail: cell.bound_report.term_tail,
            bound_mu1_term: cell.bound_report.term_mu1,
            bound_mu3_term: cell.bound_report.term_mu3,
            corollary_value: cell.bound_report.corollary_value,
            trunc_event_rate: cell.diagnostics.trunc_event_rate,
            in_band_rate: cell.diagnostics.in_band_rate,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(HarnessError::config(format!(
                "unknown format {other:?}, expected csv or json"
            ))),
        }
    }
}

pub fn rows_from_results(results: &[KSResult]) -> Vec<ReportRow> {
    results.iter().map(ReportRow::from).collect()
}

/// Render rows as CSV text. Empty input still yields the header line.
pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.d,
            r.delta_hat,
            r.se,
            r.argmax_t,
            r.bound_total,
            r.bound_tail,
            r.bound_mu1_term,
            r.bound_mu3_term,
            r.corollary_value,
            r.trunc_event_rate,
            r.in_band_rate
        ));
    }
    out
}

pub fn to_json(rows: &[ReportRow]) -> Result<String> {
    serde_json::to_string_pretty(rows)
        .map_err(|e| HarnessError::Parse(format!("report serialization: {e}")))
}

/// Write rows in the requested format; `path` of "-" means stdout.
pub fn emit_report(rows: &[ReportRow], format: Format, path: &Path) -> Result<()> {
    let body = match format {
        Format::Csv => to_csv(rows),
        Format::Json => {
            let mut s = to_json(rows)?;
            s.push('\n');
            s
        }
    };
    if path.as_os_str() == "-" {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        lock.write_all(body.as_bytes()).map_err(|e| io_err(path, e))?;
        return Ok(());
    }
    std::fs::write(path, body).map_err(|e| io_err(path, e))
}

/// Parse rows back from CSV text produced by [`to_csv`].
pub fn from_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        Some(h) => {
            return Err(HarnessError::Parse(format!(
                "unexpected report header {:?}",
                h.trim()
            )))
        }
        None => return Err(HarnessError::Parse("empty report".into())),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(HarnessError::Parse(format!(
                "report row {} has {} fields, expected 12",
                idx + 2,
                fields.len()
            )));
        }
        let cell = |k: usize| -> Result<f64> {
            fields[k].trim().parse::<f64>().map_err(|_| {
                HarnessError::Parse(format!(
                    "report row {}: bad value {:?} in column {:?}",
                    idx + 2,
                    fields[k],
                    CSV_HEADER.split(',').nth(k).unwrap_or("?")
                ))
            })
        };
        rows.push(ReportRow {
            n: cell(0)? as usize,
            d: cell(1)? as usize,
            delta_hat: cell(2)?,
            se: cell(3)?,
            argmax_t: cell(4)?,
            bound_total: cell(5)?,
            bound_tail: cell(6)?,
            bound_mu1_term: cell(7)?,
            bound_mu3_term: cell(8)?,
            corollary_value: cell(9)?,
            trunc_event_rate: cell(10)?,
            in_band_rate: cell(11)?,
        });
    }
    Ok(rows)
}

pub fn from_json(text: &str) -> Result<Vec<ReportRow>> {
    serde_json::from_str(text).map_err(|e| HarnessError::Parse(format!("report parse: {e}")))
}

/// Load a report file, dispatching on extension (.json vs anything else).
pub fn load_report(path: &Path) -> Result<Vec<ReportRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => from_json(&text),
        _ => from_csv(&text),
    }
}
