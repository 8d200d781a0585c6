//! Two-column CSV ingestion.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed CSV: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: expected exactly 2 columns, found {found}")]
    ColumnCount { line: u64, found: usize },
    #[error("line {line}, column {column}: '{value}' is not a number")]
    NonNumeric { line: u64, column: usize, value: String },
    #[error("line {line}, column {column}: '{value}' is not finite")]
    NonFinite { line: u64, column: usize, value: String },
    #[error("at least 2 data rows are required, found {rows}")]
    TooFewRows { rows: usize },
}

/// Reads comma-delimited pairs from `path`.
pub fn ingest_csv(path: &Path) -> Result<Vec<(f64, f64)>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(file)
}

/// Parses two numeric columns; a first row with a non-numeric cell is taken
/// as the header.
pub fn parse_csv<R: Read>(reader: R) -> Result<Vec<(f64, f64)>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut pairs = Vec::new();
    let mut first = true;
    for record in rdr.records() {
        let record = record.map_err(|e| IngestError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(IngestError::ColumnCount {
                line,
                found: record.len(),
            });
        }
        let header = first && record.iter().any(|cell| cell.parse::<f64>().is_err());
        first = false;
        if header {
            continue;
        }
        let mut cells = [0.0; 2];
        for (column, (cell, slot)) in record.iter().zip(cells.iter_mut()).enumerate() {
            let x: f64 = cell.parse().map_err(|_| IngestError::NonNumeric {
                line,
                column: column + 1,
                value: cell.to_string(),
            })?;
            if !x.is_finite() {
                return Err(IngestError::NonFinite {
                    line,
                    column: column + 1,
                    value: cell.to_string(),
                });
            }
            *slot = x;
        }
        pairs.push((cells[0], cells[1]));
    }
    if pairs.len() < 2 {
        return Err(IngestError::TooFewRows { rows: pairs.len() });
    }
    Ok(pairs)
}
