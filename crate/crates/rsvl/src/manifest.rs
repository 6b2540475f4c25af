//! Manifest and failure sidecar files (JSONL).

use std::path::Path;

use rsvl_core::dataset::{ManifestRecord, PromptId};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::jsonl;

/// One image that could not be captioned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionFailure {
    pub image_id: String,
    pub source_dataset: String,
    /// The prompt whose request failed, or `None` when the image was
    /// rejected before any request was made.
    pub prompt_id: Option<PromptId>,
    pub error: String,
}

/// Reads a manifest and validates every record.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Input {
        path: path.to_path_buf(),
        source,
    })?;
    parse_manifest(path, &text)
}

/// [`read_manifest`] on text already read from `path`.
pub fn parse_manifest(path: &Path, text: &str) -> Result<Vec<ManifestRecord>, Error> {
    let records: Vec<ManifestRecord> = jsonl::parse(text).map_err(|source| Error::Jsonl {
        path: path.to_path_buf(),
        source,
    })?;
    for (i, r) in records.iter().enumerate() {
        r.validate().map_err(|e| Error::Invalid {
            path: path.to_path_buf(),
            reason: format!("record {} ({}): {e}", i + 1, r.image_id),
        })?;
    }
    Ok(records)
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<(), Error> {
    jsonl::write(path, records).map_err(|source| Error::Output {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_failures(path: &Path, failures: &[CaptionFailure]) -> Result<(), Error> {
    jsonl::write(path, failures).map_err(|source| Error::Output {
        path: path.to_path_buf(),
        source,
    })
}
