use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::LabeledFeatures;
use crate::error::{Error, Result};
use crate::matrix::{dot, sq_norm, EmbeddingMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Squared Euclidean distance (same ordering as Euclidean).
    #[default]
    Euclidean,
    /// `1 - cos(a, b)`; zero vectors are at distance 1 from everything.
    Cosine,
}

/// Heap entry ordered by `(distance, index)` so the max-heap top is the
/// current worst neighbour.
#[derive(Debug, Clone, Copy)]
struct Neighbour {
    dist: f64,
    index: usize,
}

impl PartialEq for Neighbour {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Neighbour {}

impl PartialOrd for Neighbour {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbour {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.index.cmp(&other.index))
    }
}

/// Exact k-nearest-neighbour majority vote.
///
/// Distance ties are broken by ascending training index and vote ties by the
/// lowest class index, so results are reproducible.
pub fn knn_classify(
    train: &LabeledFeatures,
    queries: &EmbeddingMatrix,
    k: usize,
    metric: Metric,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::KOutOfRange { k });
    }
    if k > train.len() {
        return Err(Error::KTooLarge {
            k,
            rows: train.len(),
        });
    }
    if queries.dim() != train.features.dim() {
        return Err(Error::DimMismatch {
            left: train.features.dim(),
            right: queries.dim(),
        });
    }
    let train_norms: Vec<f64> = train
        .features
        .iter_rows()
        .map(|r| libm::sqrt(sq_norm(r)))
        .collect();

    let mut heap = BinaryHeap::with_capacity(k + 1);
    let mut votes = vec![0usize; train.n_classes];
    Ok(queries
        .iter_rows()
        .map(|q| {
            let q_norm = libm::sqrt(sq_norm(q));
            heap.clear();
            for (index, row) in train.features.iter_rows().enumerate() {
                let dist = match metric {
                    Metric::Euclidean => row
                        .iter()
                        .zip(q)
                        .map(|(&a, &b)| {
                            let d = f64::from(a) - f64::from(b);
                            d * d
                        })
                        .sum(),
                    Metric::Cosine => {
                        let denom = train_norms[index] * q_norm;
                        if denom > 0.0 {
                            1.0 - dot(row, q) / denom
                        } else {
                            1.0
                        }
                    }
                };
                let cand = Neighbour { dist, index };
                if heap.len() < k {
                    heap.push(cand);
                } else if cand < *heap.peek().expect("heap holds k ≥ 1 entries") {
                    heap.pop();
                    heap.push(cand);
                }
            }
            votes.iter_mut().for_each(|v| *v = 0);
            for n in heap.iter() {
                votes[train.labels[n.index]] += 1;
            }
            let mut best = 0;
            for (class, &v) in votes.iter().enumerate() {
                if v > votes[best] {
                    best = class;
                }
            }
            best
        })
        .collect())
}
