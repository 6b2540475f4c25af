use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{EmbeddingMatrix, ZERO_NORM_EPS};

/// Linear map `out = weight · x + bias` from feature space into the shared
/// embedding space. `weight` is `out_dim × in_dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    out_dim: usize,
    in_dim: usize,
    pub(crate) weight: Vec<f32>,
    pub(crate) bias: Vec<f32>,
}

/// Gradient of a scalar loss with respect to a head's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ProjectionHead {
    pub fn new(out_dim: usize, in_dim: usize, weight: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if weight.len() != out_dim * in_dim {
            return Err(Error::ShapeMismatch {
                what: "head weight",
                expected: out_dim * in_dim,
                found: weight.len(),
            });
        }
        if bias.len() != out_dim {
            return Err(Error::ShapeMismatch {
                what: "head bias",
                expected: out_dim,
                found: bias.len(),
            });
        }
        Ok(Self {
            out_dim,
            in_dim,
            weight,
            bias,
        })
    }

    pub fn identity(dim: usize) -> Self {
        let mut weight = vec![0.0; dim * dim];
        for i in 0..dim {
            weight[i * dim + i] = 1.0;
        }
        Self {
            out_dim: dim,
            in_dim: dim,
            weight,
            bias: vec![0.0; dim],
        }
    }

    /// Uniform `±sqrt(3 / in_dim)` weights (unit variance per output when the
    /// inputs have unit variance), zero bias.
    pub fn random<R: Rng + ?Sized>(out_dim: usize, in_dim: usize, rng: &mut R) -> Self {
        let bound = libm::sqrt(3.0 / in_dim.max(1) as f64) as f32;
        let weight = (0..out_dim * in_dim)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Self {
            out_dim,
            in_dim,
            weight,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn weight(&self) -> &[f32] {
        &self.weight
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub fn is_finite(&self) -> bool {
        self.weight.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    /// Forward pass over `rows` inputs of length `in_dim`, in `f64`.
    pub(crate) fn forward_f64(&self, inputs: &[f64], rows: usize) -> Vec<f64> {
        let (o, d) = (self.out_dim, self.in_dim);
        let mut out = vec![0.0; rows * o];
        for r in 0..rows {
            let x = &inputs[r * d..(r + 1) * d];
            for k in 0..o {
                let w = &self.weight[k * d..(k + 1) * d];
                let acc: f64 = w.iter().zip(x).map(|(&w, &x)| f64::from(w) * x).sum();
                out[r * o + k] = acc + f64::from(self.bias[k]);
            }
        }
        out
    }

    /// Parameter gradient given the upstream gradient on the outputs.
    pub(crate) fn backward(&self, inputs: &[f64], grad_out: &[f64], rows: usize) -> HeadGrad {
        let (o, d) = (self.out_dim, self.in_dim);
        let mut weight = vec![0.0; o * d];
        let mut bias = vec![0.0; o];
        for r in 0..rows {
            let x = &inputs[r * d..(r + 1) * d];
            for k in 0..o {
                let g = grad_out[r * o + k];
                bias[k] += g;
                for (w, &xv) in weight[k * d..(k + 1) * d].iter_mut().zip(x) {
                    *w += g * xv;
                }
            }
        }
        HeadGrad { weight, bias }
    }
}

/// Row `i` of the output is `weight · features.row(i) + bias`. The result is
/// never flagged as normalized.
pub fn project(features: &EmbeddingMatrix, head: &ProjectionHead) -> Result<EmbeddingMatrix> {
    if features.dim() != head.in_dim {
        return Err(Error::ShapeMismatch {
            what: "projection input dim",
            expected: head.in_dim,
            found: features.dim(),
        });
    }
    let out = head.forward_f64(&features.to_f64(), features.rows());
    EmbeddingMatrix::new(
        features.rows(),
        head.out_dim,
        out.into_iter().map(|v| v as f32).collect(),
    )
}

/// Normalizes rows of `z` in place and returns their norms.
pub(crate) fn normalize_rows(z: &mut [f64], rows: usize, dim: usize) -> Result<Vec<f64>> {
    let mut norms = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &mut z[r * dim..(r + 1) * dim];
        let norm = libm::sqrt(row.iter().map(|v| v * v).sum());
        if norm <= ZERO_NORM_EPS {
            return Err(Error::ZeroRow { index: r });
        }
        row.iter_mut().for_each(|v| *v /= norm);
        norms.push(norm);
    }
    Ok(norms)
}

/// Chain rule through `e = z / ‖z‖`: `dz = (de - e (e · de)) / ‖z‖`.
///
/// `unit` holds the normalized rows `e`, `norms` the pre-normalization norms.
pub fn normalize_backward(unit: &[f64], norms: &[f64], grad_unit: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; unit.len()];
    for (r, &norm) in norms.iter().enumerate() {
        let e = &unit[r * dim..(r + 1) * dim];
        let g = &grad_unit[r * dim..(r + 1) * dim];
        let proj: f64 = e.iter().zip(g).map(|(a, b)| a * b).sum();
        for k in 0..dim {
            out[r * dim + k] = (g[k] - e[k] * proj) / norm;
        }
    }
    out
}
