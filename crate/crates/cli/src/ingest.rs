//! External sample ingestion: delimited numeric text to a SampleMatrix.

use std::path::Path;

use snstat_core::sampling::SampleMatrix;

use crate::{io_err, HarnessError, Result};

/// Load a numeric matrix from a CSV (or TSV, by extension) file. A first
/// row that fails to parse entirely is treated as a header. Every data
/// row must have the same number of columns; offending rows and cells are
/// named in errors.
pub fn load_sample(path: &Path) -> Result<SampleMatrix> {
    let delimiter = match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("tab") => b'\t',
        _ => b',',
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => io_err(path, std::io::Error::other(e.to_string())),
            _ => HarnessError::Parse(format!("{}: {e}", path.display())),
        })?;

    let mut data: Vec<f64> = Vec::new();
    let mut d = 0usize;
    let mut n = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let mut row: Vec<f64> = Vec::with_capacity(record.len());
        let mut bad_cell = None;
        for (col, field) in record.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) => row.push(v),
                Err(_) => {
                    bad_cell = Some(col);
                    break;
                }
            }
        }
        if let Some(col) = bad_cell {
            // a non-numeric first row is a header; anywhere else it is an error
            if n == 0 && data.is_empty() {
                continue;
            }
            return Err(HarnessError::Parse(format!(
                "{}: row {}, column {}: not a number: {:?}",
                path.display(),
                idx + 1,
                col + 1,
                record.get(col).unwrap_or("")
            )));
        }
        if n == 0 {
            d = row.len();
        } else if row.len() != d {
            return Err(HarnessError::Parse(format!(
                "{}: row {} has {} columns, expected {}",
                path.display(),
                idx + 1,
                row.len(),
                d
            )));
        }
        data.extend_from_slice(&row);
        n += 1;
    }
    if n == 0 {
        return Err(HarnessError::Parse(format!("{}: no data rows", path.display())));
    }
    SampleMatrix::from_rows(n, d, data).map_err(HarnessError::Core)
}
