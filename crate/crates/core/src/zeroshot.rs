//! Prompt-template zero-shot classification.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, EmbeddingMatrix};

pub const PLACEHOLDER: &str = "{class name}";

/// Default template used for the zero-shot benchmark table.
pub const SATELLITE_A: &str = "a satellite image of {class name}";
/// Definite-article variant used for the full-benchmark table.
pub const SATELLITE_THE: &str = "the satellite image of {class name}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pattern: String,
}

impl PromptTemplate {
    pub fn new(pattern: impl Into<String>) -> Result<Self> {
        let pattern = pattern.into();
        let placeholders = pattern.matches(PLACEHOLDER).count();
        if placeholders != 1 {
            return Err(Error::BadTemplate { placeholders });
        }
        Ok(Self { pattern })
    }

    /// Looks up a named preset: `"a"` / `"satellite-a"` or `"the"` /
    /// `"satellite-the"`.
    pub fn preset(name: &str) -> Option<Self> {
        let pattern = match name {
            "a" | "satellite-a" => SATELLITE_A,
            "the" | "satellite-the" => SATELLITE_THE,
            _ => return None,
        };
        Some(Self {
            pattern: pattern.into(),
        })
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    /// Substitutes `class_name` verbatim.
    pub fn fill(&self, class_name: &str) -> String {
        self.pattern.replacen(PLACEHOLDER, class_name, 1)
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            pattern: SATELLITE_A.into(),
        }
    }
}

/// Underscores become spaces and the name is lowercased, so `"Dense_Residential"`
/// and `"dense residential"` produce the same prompt.
pub fn normalize_class_name(name: &str) -> String {
    name.replace('_', " ").to_lowercase()
}

/// One prompt per class, in input order, after [`normalize_class_name`].
pub fn build_prompts<S: AsRef<str>>(
    classes: &[S],
    template: &PromptTemplate,
) -> Result<Vec<String>> {
    if classes.is_empty() {
        return Err(Error::Empty { what: "class list" });
    }
    Ok(classes
        .iter()
        .map(|c| template.fill(&normalize_class_name(c.as_ref())))
        .collect())
}

/// Index of the most similar class for each image; ties go to the lowest
/// class index.
pub fn zeroshot_classify(
    images: &EmbeddingMatrix,
    classes: &EmbeddingMatrix,
) -> Result<Vec<usize>> {
    if images.dim() != classes.dim() {
        return Err(Error::ShapeMismatch {
            what: "class embedding dim",
            expected: images.dim(),
            found: classes.dim(),
        });
    }
    if classes.rows() == 0 {
        return Err(Error::Empty {
            what: "class embeddings",
        });
    }
    Ok(images
        .iter_rows()
        .map(|img| {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (c, class) in classes.iter_rows().enumerate() {
                let s = dot(img, class);
                if s > best_score {
                    best = c;
                    best_score = s;
                }
            }
            best
        })
        .collect())
}

pub fn top1_accuracy(pred: &[usize], labels: &[usize]) -> Result<f64> {
    if pred.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: labels.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty {
            what: "prediction set",
        });
    }
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(100.0 * hits as f64 / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetAccuracy {
    pub dataset: String,
    pub top1: f64,
}

/// Per-dataset top-1 accuracy plus the unweighted average across datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotReport {
    pub datasets: Vec<DatasetAccuracy>,
    pub average: f64,
}

impl ZeroShotReport {
    pub fn new(datasets: Vec<DatasetAccuracy>) -> Result<Self> {
        if datasets.is_empty() {
            return Err(Error::Empty {
                what: "dataset list",
            });
        }
        let average = datasets.iter().map(|d| d.top1).sum::<f64>() / datasets.len() as f64;
        Ok(Self { datasets, average })
    }
}
