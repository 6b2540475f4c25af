use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CropRect;

/// Which of the two captioning prompts produced a caption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PromptId {
    Short,
    Detail,
}

impl PromptId {
    pub const ALL: [PromptId; 2] = [PromptId::Short, PromptId::Detail];

    /// Exact prompt text sent to the captioning model.
    pub const fn text(self) -> &'static str {
        match self {
            PromptId::Short => "Write a short description for the image.",
            PromptId::Detail => "Describe the image in detail",
        }
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            PromptId::Short => "SHORT",
            PromptId::Detail => "DETAIL",
        }
    }
}

impl fmt::Display for PromptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One image–prompt–caption triple with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub image_id: String,
    pub source_dataset: String,
    pub crop: CropRect,
    pub prompt_id: PromptId,
    pub prompt_text: String,
    pub caption: String,
}

impl ManifestRecord {
    pub fn new(
        image_id: impl Into<String>,
        source_dataset: impl Into<String>,
        crop: CropRect,
        prompt_id: PromptId,
        caption: impl Into<String>,
    ) -> Result<Self> {
        let record = Self {
            image_id: image_id.into(),
            source_dataset: source_dataset.into(),
            crop,
            prompt_id,
            prompt_text: prompt_id.text().into(),
            caption: caption.into(),
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if self.prompt_text != self.prompt_id.text() {
            return Err(Error::InvalidArgument {
                field: "prompt_text",
                reason: "does not match the canonical text for prompt_id",
            });
        }
        if self.caption.is_empty() {
            return Err(Error::InvalidArgument {
                field: "caption",
                reason: "must not be empty",
            });
        }
        Ok(())
    }
}

/// Pair counts per source dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestSummary {
    pub per_source: BTreeMap<String, u64>,
    pub total: u64,
}

impl ManifestSummary {
    pub fn of(records: &[ManifestRecord]) -> Self {
        let mut summary = Self::default();
        for r in records {
            summary.add(&r.source_dataset, 1);
        }
        summary
    }

    pub fn add(&mut self, source: &str, count: u64) {
        *self.per_source.entry(source.to_string()).or_insert(0) += count;
        self.total += count;
    }

    /// Sum of two summaries, source by source.
    pub fn combine(mut self, other: &ManifestSummary) -> Self {
        for (source, &count) in &other.per_source {
            self.add(source, count);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergedManifest {
    pub records: Vec<ManifestRecord>,
    pub summary: ManifestSummary,
}

/// Concatenates manifests in order, rejecting any repeated
/// `(image_id, prompt_id)` key.
pub fn merge_manifests(parts: Vec<Vec<ManifestRecord>>) -> Result<MergedManifest> {
    let mut seen: BTreeSet<(String, PromptId)> = BTreeSet::new();
    let mut records = Vec::with_capacity(parts.iter().map(Vec::len).sum());
    for part in parts {
        for r in part {
            if !seen.insert((r.image_id.clone(), r.prompt_id)) {
                return Err(Error::DuplicateKey {
                    image_id: r.image_id,
                    prompt_id: r.prompt_id.as_str().into(),
                });
            }
            records.push(r);
        }
    }
    let summary = ManifestSummary::of(&records);
    Ok(MergedManifest { records, summary })
}
