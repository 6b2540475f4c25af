//! Row-id sidecar for RSEB files: `{"row": n, "id": "...", "label": n | null}`
//! per line, rows in order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::jsonl;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdRecord {
    pub row: usize,
    pub id: String,
    pub label: Option<usize>,
}

/// Reads a sidecar and checks that it lists rows `0..expected_rows` in order.
pub fn read_ids(path: &Path, expected_rows: usize) -> Result<Vec<IdRecord>, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Input {
        path: path.to_path_buf(),
        source,
    })?;
    parse_ids(path, &text, expected_rows)
}

/// [`read_ids`] on text already read from `path`.
pub fn parse_ids(path: &Path, text: &str, expected_rows: usize) -> Result<Vec<IdRecord>, Error> {
    let records: Vec<IdRecord> = jsonl::parse(text).map_err(|source| Error::Jsonl {
        path: path.to_path_buf(),
        source,
    })?;
    check_rows(&records, expected_rows).map_err(|reason| Error::Invalid {
        path: path.to_path_buf(),
        reason,
    })?;
    Ok(records)
}

fn check_rows(records: &[IdRecord], expected_rows: usize) -> Result<(), String> {
    if records.len() != expected_rows {
        return Err(format!(
            "{} id records for {} matrix rows",
            records.len(),
            expected_rows
        ));
    }
    match records.iter().enumerate().find(|(i, r)| r.row != *i) {
        Some((i, r)) => Err(format!(
            "record {} has row {}, expected {}",
            i + 1,
            r.row,
            i
        )),
        None => Ok(()),
    }
}

/// Labels of every row; a null label is an error naming the row.
pub fn labels(path: &Path, records: &[IdRecord]) -> Result<Vec<usize>, Error> {
    records
        .iter()
        .map(|r| {
            r.label.ok_or_else(|| Error::Invalid {
                path: path.to_path_buf(),
                reason: format!("row {} ({}) has no label", r.row, r.id),
            })
        })
        .collect()
}
