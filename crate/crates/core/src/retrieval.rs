//! Image↔text retrieval recall with many captions per image.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{l2_normalize, similarity, EmbeddingMatrix, SimilarityMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    ImageToText,
    TextToImage,
}

/// Ground truth linking every caption to exactly one image.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptionMap {
    image_of: Vec<usize>,
    captions_of: Vec<Vec<usize>>,
}

impl CaptionMap {
    /// `image_of[c]` is the image described by caption `c`. Every image in
    /// `0..n_images` must have at least one caption.
    pub fn new(n_images: usize, image_of: Vec<usize>) -> Result<Self> {
        let mut captions_of = vec![Vec::new(); n_images];
        for (caption, &image) in image_of.iter().enumerate() {
            if image >= n_images {
                return Err(Error::ShapeMismatch {
                    what: "caption's image index",
                    expected: n_images,
                    found: image,
                });
            }
            captions_of[image].push(caption);
        }
        if captions_of.iter().any(Vec::is_empty) {
            return Err(Error::InvalidArgument {
                field: "caption map",
                reason: "every image needs at least one caption",
            });
        }
        Ok(Self {
            image_of,
            captions_of,
        })
    }

    /// One caption per image, caption `i` ↔ image `i`.
    pub fn one_to_one(n: usize) -> Self {
        Self {
            image_of: (0..n).collect(),
            captions_of: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn n_images(&self) -> usize {
        self.captions_of.len()
    }

    pub fn n_captions(&self) -> usize {
        self.image_of.len()
    }

    pub fn image_of(&self, caption: usize) -> usize {
        self.image_of[caption]
    }

    pub fn captions_of(&self, image: usize) -> &[usize] {
        &self.captions_of[image]
    }
}

/// Aligned image and caption embeddings plus their ground truth.
#[derive(Debug, Clone)]
pub struct PairedSet {
    pub images: EmbeddingMatrix,
    pub texts: EmbeddingMatrix,
    pub map: CaptionMap,
}

impl PairedSet {
    pub fn new(images: EmbeddingMatrix, texts: EmbeddingMatrix, map: CaptionMap) -> Result<Self> {
        check_counts(images.rows(), texts.rows(), &map)?;
        if images.dim() != texts.dim() {
            return Err(Error::DimMismatch {
                left: images.dim(),
                right: texts.dim(),
            });
        }
        Ok(Self { images, texts, map })
    }
}

/// All values are percentages in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub r1_i2t: f64,
    pub r5_i2t: f64,
    pub r10_i2t: f64,
    pub r1_t2i: f64,
    pub r5_t2i: f64,
    pub r10_t2i: f64,
    pub mean_recall: f64,
}

impl RetrievalReport {
    /// Builds a report from the six recalls; `mean_recall` is their mean.
    pub fn from_recalls(i2t: [f64; 3], t2i: [f64; 3]) -> Self {
        let mean_recall = (i2t.iter().sum::<f64>() + t2i.iter().sum::<f64>()) / 6.0;
        Self {
            r1_i2t: i2t[0],
            r5_i2t: i2t[1],
            r10_i2t: i2t[2],
            r1_t2i: t2i[0],
            r5_t2i: t2i[1],
            r10_t2i: t2i[2],
            mean_recall,
        }
    }
}

/// Candidate indices by descending score, ties by ascending index.
pub fn rank_row(scores: &[f32]) -> Result<Vec<usize>> {
    check_finite(scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| beats(scores, a, b));
    Ok(order)
}

/// `Less` when candidate `a` ranks ahead of `b`.
#[inline]
fn beats(scores: &[f32], a: usize, b: usize) -> Ordering {
    scores[b]
        .partial_cmp(&scores[a])
        .unwrap_or(Ordering::Equal)
        .then(a.cmp(&b))
}

fn check_finite(scores: &[f32]) -> Result<()> {
    match scores.iter().position(|s| s.is_nan()) {
        Some(index) => Err(Error::NaNScore { index }),
        None => Ok(()),
    }
}

/// 0-based rank of `target` among `scores` under the [`rank_row`] order,
/// counted directly instead of sorting.
fn position_of(scores: &[f32], target: usize) -> usize {
    let s = scores[target];
    scores
        .iter()
        .enumerate()
        .filter(|&(c, &x)| x > s || (x == s && c < target))
        .count()
}

fn check_counts(n_images: usize, n_texts: usize, map: &CaptionMap) -> Result<()> {
    if n_images != map.n_images() {
        return Err(Error::ShapeMismatch {
            what: "image count vs ground truth",
            expected: map.n_images(),
            found: n_images,
        });
    }
    if n_texts != map.n_captions() {
        return Err(Error::ShapeMismatch {
            what: "caption count vs ground truth",
            expected: map.n_captions(),
            found: n_texts,
        });
    }
    Ok(())
}

/// Recall@k as a percentage.
///
/// Image→text: an image hits when any of its captions ranks in its top `k`;
/// the denominator is the number of images. Text→image: a caption hits when
/// its image ranks in its top `k`; the denominator is the number of captions.
pub fn recall_at_k(
    sim: &SimilarityMatrix,
    map: &CaptionMap,
    k: usize,
    direction: Direction,
) -> Result<f64> {
    if k < 1 {
        return Err(Error::KOutOfRange { k });
    }
    check_counts(sim.n_images(), sim.n_texts(), map)?;
    check_finite(sim.scores())?;

    let (hits, total) = match direction {
        Direction::ImageToText => {
            let hits = (0..sim.n_images())
                .filter(|&i| {
                    let row = sim.image_row(i);
                    map.captions_of(i).iter().any(|&c| position_of(row, c) < k)
                })
                .count();
            (hits, sim.n_images())
        }
        Direction::TextToImage => {
            let hits = (0..sim.n_texts())
                .filter(|&t| position_of(&sim.text_column(t), map.image_of(t)) < k)
                .count();
            (hits, sim.n_texts())
        }
    };
    if total == 0 {
        return Err(Error::Empty {
            what: "retrieval query set",
        });
    }
    Ok(100.0 * hits as f64 / total as f64)
}

/// Normalizes both sides (unless already normalized), scores them by dot
/// product and reports R@1/5/10 in both directions plus their mean.
pub fn retrieval_report(
    images: &EmbeddingMatrix,
    texts: &EmbeddingMatrix,
    map: &CaptionMap,
) -> Result<RetrievalReport> {
    let images = ensure_normalized(images)?;
    let texts = ensure_normalized(texts)?;
    let sim = similarity(&images, &texts)?;
    report_from_similarity(&sim, map)
}

pub fn report_from_similarity(sim: &SimilarityMatrix, map: &CaptionMap) -> Result<RetrievalReport> {
    let mut i2t = [0.0; 3];
    let mut t2i = [0.0; 3];
    for (slot, k) in [1, 5, 10].into_iter().enumerate() {
        i2t[slot] = recall_at_k(sim, map, k, Direction::ImageToText)?;
        t2i[slot] = recall_at_k(sim, map, k, Direction::TextToImage)?;
    }
    Ok(RetrievalReport::from_recalls(i2t, t2i))
}

fn ensure_normalized(m: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    if m.is_normalized() {
        Ok(m.clone())
    } else {
        l2_normalize(m)
    }
}
