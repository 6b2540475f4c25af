//! Symmetric InfoNCE loss and its analytic gradient.
//!
//! With logits `S = V Tᵀ / τ`, row softmax `P` and column softmax `Q`:
//!
//! ```text
//! loss_i2t = mean_i  -log P[i][i]
//! loss_t2i = mean_j  -log Q[j][j]
//! loss     = (loss_i2t + loss_t2i) / 2
//! dL/dS    = (P + Q - 2I) / 2N
//! dV = (dL/dS) T / τ        dT = (dL/dS)ᵀ V / τ
//! ```

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoNceLoss {
    pub loss: f64,
    pub loss_i2t: f64,
    pub loss_t2i: f64,
}

/// Gradients with respect to the (already normalized) embedding entries,
/// row-major `rows × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoNceGrad {
    pub rows: usize,
    pub dim: usize,
    pub images: Vec<f64>,
    pub texts: Vec<f64>,
}

pub fn info_nce_loss(
    images: &EmbeddingMatrix,
    texts: &EmbeddingMatrix,
    temperature: f64,
) -> Result<InfoNceLoss> {
    check_inputs(images, texts, temperature)?;
    let (v, t) = (images.to_f64(), texts.to_f64());
    Ok(forward(&v, &t, images.rows(), images.dim(), temperature).0)
}

pub fn info_nce_grad(
    images: &EmbeddingMatrix,
    texts: &EmbeddingMatrix,
    temperature: f64,
) -> Result<InfoNceGrad> {
    check_inputs(images, texts, temperature)?;
    let (v, t) = (images.to_f64(), texts.to_f64());
    Ok(backward(&v, &t, images.rows(), images.dim(), temperature))
}

/// Loss over raw `f64` buffers. Row norms are not checked, which is what the
/// training loop and finite-difference checks need.
pub fn info_nce_loss_raw(
    images: &[f64],
    texts: &[f64],
    rows: usize,
    dim: usize,
    temperature: f64,
) -> Result<InfoNceLoss> {
    check_raw(images, texts, rows, dim, temperature)?;
    Ok(forward(images, texts, rows, dim, temperature).0)
}

/// Loss and gradient over raw `f64` buffers; see [`info_nce_loss_raw`].
pub fn info_nce_grad_raw(
    images: &[f64],
    texts: &[f64],
    rows: usize,
    dim: usize,
    temperature: f64,
) -> Result<(InfoNceLoss, InfoNceGrad)> {
    check_raw(images, texts, rows, dim, temperature)?;
    let loss = forward(images, texts, rows, dim, temperature).0;
    Ok((loss, backward(images, texts, rows, dim, temperature)))
}

fn check_inputs(images: &EmbeddingMatrix, texts: &EmbeddingMatrix, temperature: f64) -> Result<()> {
    if !images.is_normalized() {
        return Err(Error::NotNormalized {
            what: "image embeddings",
        });
    }
    if !texts.is_normalized() {
        return Err(Error::NotNormalized {
            what: "text embeddings",
        });
    }
    if images.dim() != texts.dim() {
        return Err(Error::DimMismatch {
            left: images.dim(),
            right: texts.dim(),
        });
    }
    if images.rows() != texts.rows() {
        return Err(Error::ShapeMismatch {
            what: "InfoNCE batch rows",
            expected: images.rows(),
            found: texts.rows(),
        });
    }
    check_raw(
        images.data(),
        texts.data(),
        images.rows(),
        images.dim(),
        temperature,
    )
}

fn check_temperature(temperature: f64) -> Result<()> {
    if temperature > 0.0 && temperature.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveTemperature(temperature))
    }
}

fn check_raw<A, B>(
    images: &[A],
    texts: &[B],
    rows: usize,
    dim: usize,
    temperature: f64,
) -> Result<()> {
    check_temperature(temperature)?;
    if rows == 0 {
        return Err(Error::Empty {
            what: "InfoNCE batch",
        });
    }
    for len in [images.len(), texts.len()] {
        if len != rows * dim {
            return Err(Error::ShapeMismatch {
                what: "InfoNCE batch",
                expected: rows * dim,
                found: len,
            });
        }
    }
    Ok(())
}

fn logits(v: &[f64], t: &[f64], n: usize, d: usize, temperature: f64) -> Vec<f64> {
    let inv_t = 1.0 / temperature;
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        let vi = &v[i * d..(i + 1) * d];
        for j in 0..n {
            let tj = &t[j * d..(j + 1) * d];
            let dot: f64 = vi.iter().zip(tj).map(|(a, b)| a * b).sum();
            s[i * n + j] = dot * inv_t;
        }
    }
    s
}

/// Returns the loss plus the row softmax `P` and column softmax `Q`
/// (both stored row-major, `Q[i][j]` normalized over `i`).
fn forward(
    v: &[f64],
    t: &[f64],
    n: usize,
    d: usize,
    temperature: f64,
) -> (InfoNceLoss, Vec<f64>, Vec<f64>) {
    let s = logits(v, t, n, d, temperature);
    let mut p = vec![0.0; n * n];
    let mut q = vec![0.0; n * n];

    let mut loss_i2t = 0.0;
    for i in 0..n {
        let row = &s[i * n..(i + 1) * n];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (j, &x) in row.iter().enumerate() {
            let e = libm::exp(x - max);
            p[i * n + j] = e;
            z += e;
        }
        for x in &mut p[i * n..(i + 1) * n] {
            *x /= z;
        }
        loss_i2t += (max - row[i]) + libm::log(z);
    }

    let mut loss_t2i = 0.0;
    for j in 0..n {
        let max = (0..n)
            .map(|i| s[i * n + j])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for i in 0..n {
            let e = libm::exp(s[i * n + j] - max);
            q[i * n + j] = e;
            z += e;
        }
        for i in 0..n {
            q[i * n + j] /= z;
        }
        loss_t2i += (max - s[j * n + j]) + libm::log(z);
    }

    let nf = n as f64;
    let (loss_i2t, loss_t2i) = (loss_i2t / nf, loss_t2i / nf);
    let loss = InfoNceLoss {
        loss: 0.5 * (loss_i2t + loss_t2i),
        loss_i2t,
        loss_t2i,
    };
    (loss, p, q)
}

fn backward(v: &[f64], t: &[f64], n: usize, d: usize, temperature: f64) -> InfoNceGrad {
    let (_, p, q) = forward(v, t, n, d, temperature);
    let scale = 1.0 / (2.0 * n as f64 * temperature);
    // g[i][j] = (P + Q - 2I)[i][j] / (2Nτ)
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let diag = if i == j { 2.0 } else { 0.0 };
            g[i * n + j] = (p[i * n + j] + q[i * n + j] - diag) * scale;
        }
    }

    let mut dv = vec![0.0; n * d];
    let mut dt = vec![0.0; n * d];
    for i in 0..n {
        for j in 0..n {
            let gij = g[i * n + j];
            if gij == 0.0 {
                continue;
            }
            for k in 0..d {
                dv[i * d + k] += gij * t[j * d + k];
                dt[j * d + k] += gij * v[i * d + k];
            }
        }
    }
    InfoNceGrad {
        rows: n,
        dim: d,
        images: dv,
        texts: dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::l2_normalize;

    fn unit(rows: &[[f32; 2]]) -> EmbeddingMatrix {
        l2_normalize(&EmbeddingMatrix::from_rows(2, rows).unwrap()).unwrap()
    }

    #[test]
    fn all_equal_rows_give_ln_n() {
        let m = l2_normalize(&EmbeddingMatrix::from_rows(3, &[[1.0f32, 2.0, 3.0]; 4]).unwrap())
            .unwrap();
        let l = info_nce_loss(&m, &m, 0.07).unwrap();
        assert!((l.loss - libm::log(4.0)).abs() < 1e-6, "{l:?}");
        assert!((l.loss_i2t - l.loss_t2i).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_pair_closed_form() {
        let m = unit(&[[1.0, 0.0], [0.0, 1.0]]);
        let l = info_nce_loss(&m, &m, 0.07).unwrap();
        let expected = libm::log1p(libm::exp(-1.0 / 0.07));
        assert!((l.loss - expected).abs() < 1e-8, "{} vs {expected}", l.loss);
    }

    #[test]
    fn single_pair_is_zero_loss_and_zero_grad() {
        let m = unit(&[[0.6, 0.8]]);
        let other = unit(&[[1.0, 0.0]]);
        assert_eq!(info_nce_loss(&m, &other, 0.07).unwrap().loss, 0.0);
        let g = info_nce_grad(&m, &other, 0.07).unwrap();
        assert!(g.images.iter().chain(&g.texts).all(|&x| x == 0.0));
    }

    #[test]
    fn swapping_inputs_swaps_gradients() {
        let v = unit(&[[1.0, 0.2], [0.3, 1.0], [-0.5, 0.4]]);
        let t = unit(&[[0.9, 0.1], [0.1, 0.8], [-0.7, 0.2]]);
        let a = info_nce_grad(&v, &t, 0.1).unwrap();
        let b = info_nce_grad(&t, &v, 0.1).unwrap();
        for (x, y) in a.images.iter().zip(&b.texts) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in a.texts.iter().zip(&b.images) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn input_validation() {
        let v = unit(&[[1.0, 0.0], [0.0, 1.0]]);
        let one = unit(&[[1.0, 0.0]]);
        let raw = EmbeddingMatrix::from_rows(2, &[[3.0f32, 4.0], [1.0, 0.0]]).unwrap();
        assert!(matches!(
            info_nce_loss(&v, &one, 0.07),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            info_nce_loss(&raw, &v, 0.07),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            info_nce_loss(&v, &v, 0.0),
            Err(Error::NonPositiveTemperature(_))
        ));
        assert!(matches!(
            info_nce_loss(&v, &v, -1.0),
            Err(Error::NonPositiveTemperature(_))
        ));
    }
}
