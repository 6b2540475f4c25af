//! Frozen-feature probes: stratified splits, k-shot sampling, multinomial
//! logistic regression and exact k-NN.

mod knn;
mod logreg;
mod split;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;

pub use knn::{knn_classify, Metric};
pub use logreg::{logreg_fit, logreg_predict, LogRegFit, LogRegModel};
pub use split::{sample_k_shot, sample_k_shot_indices, stratified_split, Split};

/// Shot counts evaluated in the few-shot protocol.
pub const SHOT_SETTINGS: [usize; 5] = [1, 4, 8, 16, 32];

/// Neighbourhood size used for k-NN evaluation.
pub const DEFAULT_KNN_K: usize = 20;

/// Features with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    pub features: EmbeddingMatrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl LabeledFeatures {
    pub fn new(features: EmbeddingMatrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::LengthMismatch {
                left: features.rows(),
                right: labels.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::LabelOutOfRange { label, n_classes });
        }
        Ok(Self {
            features,
            labels,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            features: self.features.select_rows(indices)?,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        })
    }
}

/// Training examples per class; serialized as an integer or `"full"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "ShotsRepr", try_from = "ShotsRepr")]
pub enum Shots {
    K(usize),
    Full,
}

impl core::fmt::Display for Shots {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Shots::K(k) => write!(f, "{k}"),
            Shots::Full => f.write_str("full"),
        }
    }
}

impl core::str::FromStr for Shots {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(Shots::Full);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(Shots::K(k)),
            _ => Err(Error::InvalidArgument {
                field: "shots",
                reason: "expected a positive integer or \"full\"",
            }),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ShotsRepr {
    K(usize),
    Named(alloc::string::String),
}

impl From<Shots> for ShotsRepr {
    fn from(s: Shots) -> Self {
        match s {
            Shots::K(k) => ShotsRepr::K(k),
            Shots::Full => ShotsRepr::Named("full".into()),
        }
    }
}

impl TryFrom<ShotsRepr> for Shots {
    type Error = Error;

    fn try_from(r: ShotsRepr) -> Result<Self> {
        match r {
            ShotsRepr::K(k) => alloc::format!("{k}").parse(),
            ShotsRepr::Named(s) => s.parse(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub shots: Shots,
    pub split_ratio: f64,
    pub seed: u64,
    /// Inverse regularization strength `C`, as in the usual logistic
    /// regression parameterization.
    pub l2_strength: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            shots: Shots::Full,
            split_ratio: 0.8,
            seed: 0,
            l2_strength: 1.0,
            max_iter: 1000,
            grad_tol: 1e-6,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::InvalidArgument {
                field: "split_ratio",
                reason: "must lie strictly between 0 and 1",
            });
        }
        if self.shots == Shots::K(0) {
            return Err(Error::InvalidArgument {
                field: "shots",
                reason: "must be at least 1",
            });
        }
        if !(self.l2_strength > 0.0) {
            return Err(Error::InvalidArgument {
                field: "l2_strength",
                reason: "must be positive",
            });
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::InvalidArgument {
                field: "grad_tol",
                reason: "must be nonnegative",
            });
        }
        Ok(())
    }
}
