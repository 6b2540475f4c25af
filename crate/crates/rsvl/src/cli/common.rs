use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rsvl_core::dataset::ManifestRecord;
use rsvl_core::EmbeddingMatrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Error;
use crate::ids::{self, IdRecord};
use crate::manifest;
use crate::report::{sha256_hex, to_pretty_json, Envelope, InputDigest, Metadata, Provenance};
use crate::rseb;

/// Reads input files once, recording a digest of each.
pub(super) struct Inputs {
    digests: Vec<InputDigest>,
}

impl Inputs {
    pub(super) fn new() -> Self {
        Self {
            digests: Vec::new(),
        }
    }

    pub(super) fn bytes(&mut self, role: &str, path: &Path) -> Result<Vec<u8>, Error> {
        let bytes = fs::read(path).map_err(|source| Error::Input {
            path: path.to_path_buf(),
            source,
        })?;
        self.digests.push(InputDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    pub(super) fn text(&mut self, role: &str, path: &Path) -> Result<String, Error> {
        String::from_utf8(self.bytes(role, path)?).map_err(|e| Error::Invalid {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub(super) fn rseb(&mut self, role: &str, path: &Path) -> Result<EmbeddingMatrix, Error> {
        let bytes = self.bytes(role, path)?;
        rseb::decode(&bytes).map_err(|source| Error::Rseb {
            path: path.to_path_buf(),
            source,
        })
    }

    pub(super) fn ids(
        &mut self,
        role: &str,
        path: &Path,
        rows: usize,
    ) -> Result<Vec<IdRecord>, Error> {
        let text = self.text(role, path)?;
        ids::parse_ids(path, &text, rows)
    }

    pub(super) fn labels(
        &mut self,
        role: &str,
        path: &Path,
        rows: usize,
    ) -> Result<Vec<usize>, Error> {
        let records = self.ids(role, path, rows)?;
        ids::labels(path, &records)
    }

    pub(super) fn json<T: DeserializeOwned>(
        &mut self,
        role: &str,
        path: &Path,
    ) -> Result<T, Error> {
        let bytes = self.bytes(role, path)?;
        serde_json::from_slice(&bytes).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub(super) fn manifest(
        &mut self,
        role: &str,
        path: &Path,
    ) -> Result<Vec<ManifestRecord>, Error> {
        let text = self.text(role, path)?;
        manifest::parse_manifest(path, &text)
    }

    pub(super) fn jsonl<T: DeserializeOwned>(
        &mut self,
        role: &str,
        path: &Path,
    ) -> Result<Vec<T>, Error> {
        let text = self.text(role, path)?;
        crate::jsonl::parse(&text).map_err(|source| Error::Jsonl {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub(super) fn write_file(path: &Path, contents: &[u8]) -> Result<(), Error> {
    fs::write(path, contents).map_err(|source| Error::Output {
        path: path.to_path_buf(),
        source,
    })
}

pub(super) fn create_dir(path: &Path) -> Result<(), Error> {
    fs::create_dir_all(path).map_err(|source| Error::Output {
        path: path.to_path_buf(),
        source,
    })
}

/// What a subcommand hands back for the report file and the console.
pub(super) struct Finished<'a, R: Serialize, P: Serialize> {
    pub command: &'a str,
    pub report: R,
    pub parameters: &'a P,
    pub seed: Option<u64>,
    pub inputs: Inputs,
    pub report_path: &'a PathBuf,
    pub table: String,
}

impl<R: Serialize, P: Serialize> Finished<'_, R, P> {
    pub(super) fn emit(self, out: &mut dyn Write) -> Result<(), Error> {
        let envelope = Envelope {
            command: self.command.to_string(),
            report: self.report,
            provenance: Provenance::new(self.parameters, self.seed, self.inputs.digests),
            metadata: Metadata::now(),
        };
        write_file(self.report_path, to_pretty_json(&envelope).as_bytes())?;
        let console = |source| Error::Output {
            path: PathBuf::from("<stdout>"),
            source,
        };
        out.write_all(self.table.as_bytes()).map_err(console)?;
        writeln!(out, "report: {}", self.report_path.display()).map_err(console)
    }
}

/// Plain-text table with columns padded to their widest cell; the first
/// column is left-aligned, the rest right-aligned.
pub(super) fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            if i == 0 {
                s.push_str(&format!("{cell:<w$}"));
            } else {
                s.push_str(&format!("{cell:>w$}"));
            }
        }
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(headers.to_vec());
    let rules: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&line(rules.iter().map(String::as_str).collect()));
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

pub(super) fn pct(v: f64) -> String {
    format!("{v:.2}")
}
