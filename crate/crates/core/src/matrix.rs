//! Dense row-major embedding matrices, L2 normalization and dot-product
//! similarity.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Rows whose Euclidean norm is at or below this are treated as zero.
pub const ZERO_NORM_EPS: f64 = 1e-12;

/// Tolerance on `|‖row‖ - 1|` for a matrix flagged as normalized.
pub const UNIT_NORM_TOL: f64 = 1e-5;

/// Dense `rows × dim` matrix of `f32` embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
    normalized: bool,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        let expected = rows.checked_mul(dim).ok_or(Error::InvalidArgument {
            field: "rows × dim",
            reason: "overflows usize",
        })?;
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                what: "embedding data length",
                expected,
                found: data.len(),
            });
        }
        Ok(Self {
            rows,
            dim,
            data,
            normalized: false,
        })
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: alloc::vec![0.0; rows * dim],
            normalized: false,
        }
    }

    /// Builds a matrix from equally sized rows. `dim` is needed so an empty
    /// slice still yields a well-formed `0 × dim` matrix.
    pub fn from_rows<R: AsRef<[f32]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimMismatch {
                    left: dim,
                    right: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), dim, data)
    }

    /// Marks the matrix as normalized (or not) after checking every row.
    ///
    /// Used when loading matrices whose producer already normalized them.
    pub fn with_normalized_flag(mut self, normalized: bool) -> Result<Self> {
        if normalized {
            for i in 0..self.rows {
                let norm = libm::sqrt(sq_norm(self.row(i)));
                if (norm - 1.0).abs() > UNIT_NORM_TOL {
                    return Err(Error::NotNormalized {
                        what: "flagged matrix",
                    });
                }
            }
        }
        self.normalized = normalized;
        Ok(self)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> + '_ {
        // chunks_exact(0) panics, and a 0-dim matrix still has `rows` rows
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Gathers the given rows into a new matrix, keeping the normalized flag.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::ShapeMismatch {
                    what: "row index",
                    expected: self.rows,
                    found: i,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Self {
            rows: indices.len(),
            dim: self.dim,
            data,
            normalized: self.normalized,
        })
    }

    /// Returns a copy with every entry multiplied by `factor`. The result is
    /// not flagged as normalized.
    pub fn scaled(&self, factor: f32) -> Self {
        Self {
            rows: self.rows,
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
            normalized: false,
        }
    }

    /// Widened copy of the data, row-major.
    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Scales every row to unit Euclidean norm.
///
/// Norms are computed in `f64`; a row with norm `≤ 1e-12` is rejected rather
/// than producing NaNs downstream.
pub fn l2_normalize(m: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    let mut data = Vec::with_capacity(m.data.len());
    for (index, row) in m.iter_rows().enumerate() {
        let norm = libm::sqrt(sq_norm(row));
        if norm <= ZERO_NORM_EPS {
            return Err(Error::ZeroRow { index });
        }
        data.extend(row.iter().map(|&v| (f64::from(v) / norm) as f32));
    }
    Ok(EmbeddingMatrix {
        rows: m.rows,
        dim: m.dim,
        data,
        normalized: true,
    })
}

/// `images.rows × texts.rows` matrix of dot products, images as rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n_images: usize,
    n_texts: usize,
    scores: Vec<f32>,
}

impl SimilarityMatrix {
    pub fn new(n_images: usize, n_texts: usize, scores: Vec<f32>) -> Result<Self> {
        if scores.len() != n_images * n_texts {
            return Err(Error::ShapeMismatch {
                what: "similarity scores",
                expected: n_images * n_texts,
                found: scores.len(),
            });
        }
        Ok(Self {
            n_images,
            n_texts,
            scores,
        })
    }

    #[inline]
    pub fn n_images(&self) -> usize {
        self.n_images
    }

    #[inline]
    pub fn n_texts(&self) -> usize {
        self.n_texts
    }

    #[inline]
    pub fn get(&self, image: usize, text: usize) -> f32 {
        self.scores[image * self.n_texts + text]
    }

    #[inline]
    pub fn image_row(&self, image: usize) -> &[f32] {
        &self.scores[image * self.n_texts..(image + 1) * self.n_texts]
    }

    /// Scores of one caption against every image (a column, copied out).
    pub fn text_column(&self, text: usize) -> Vec<f32> {
        (0..self.n_images).map(|i| self.get(i, text)).collect()
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    pub fn transpose(&self) -> Self {
        let mut scores = Vec::with_capacity(self.scores.len());
        for t in 0..self.n_texts {
            scores.extend((0..self.n_images).map(|i| self.get(i, t)));
        }
        Self {
            n_images: self.n_texts,
            n_texts: self.n_images,
            scores,
        }
    }
}

/// `scores[i][j] = images.row(i) · texts.row(j)`.
pub fn similarity(images: &EmbeddingMatrix, texts: &EmbeddingMatrix) -> Result<SimilarityMatrix> {
    if images.dim != texts.dim {
        return Err(Error::DimMismatch {
            left: images.dim,
            right: texts.dim,
        });
    }
    let mut scores = Vec::with_capacity(images.rows * texts.rows);
    for a in images.iter_rows() {
        scores.extend(texts.iter_rows().map(|b| dot(a, b) as f32));
    }
    SimilarityMatrix::new(images.rows, texts.rows, scores)
}

/// Dot product accumulated in `f64`.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

#[inline]
pub(crate) fn sq_norm(a: &[f32]) -> f64 {
    a.iter().map(|&x| f64::from(x) * f64::from(x)).sum()
}
