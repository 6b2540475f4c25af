use alloc::vec;
use alloc::vec::Vec;

use super::{LabeledFeatures, ProbeConfig};
use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Multinomial logistic regression: scores `weight · x + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub n_classes: usize,
    pub dim: usize,
    /// `n_classes × dim`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub l2_strength: f64,
}

/// Outcome of [`logreg_fit`]. A run that hits `max_iter` still returns its
/// last iterate; [`LogRegFit::check`] turns that into an error when needed.
#[derive(Debug, Clone)]
pub struct LogRegFit {
    pub model: LogRegModel,
    pub iterations: usize,
    pub grad_inf_norm: f64,
    pub converged: bool,
    /// Objective after initialisation and after every accepted step.
    pub objective_trace: Vec<f64>,
}

impl LogRegFit {
    pub fn check(&self) -> Result<&LogRegModel> {
        if self.converged {
            Ok(&self.model)
        } else {
            Err(Error::DidNotConverge {
                grad_inf_norm: self.grad_inf_norm,
            })
        }
    }
}

impl LogRegModel {
    pub fn scores(&self, x: &[f32]) -> Vec<f64> {
        (0..self.n_classes)
            .map(|c| {
                let w = &self.weight[c * self.dim..(c + 1) * self.dim];
                w.iter().zip(x).map(|(w, &x)| w * f64::from(x)).sum::<f64>() + self.bias[c]
            })
            .collect()
    }

    /// Mean cross-entropy plus `‖W‖² / (2 · C · n)` on `data`.
    pub fn objective(&self, data: &LabeledFeatures) -> f64 {
        let problem = Problem::new(data, self.l2_strength);
        problem.eval(&self.pack(), false).0
    }

    fn pack(&self) -> Vec<f64> {
        let mut theta = self.weight.clone();
        theta.extend_from_slice(&self.bias);
        theta
    }
}

struct Problem {
    x: Vec<f64>,
    labels: Vec<usize>,
    n: usize,
    dim: usize,
    classes: usize,
    reg: f64,
}

impl Problem {
    fn new(data: &LabeledFeatures, l2_strength: f64) -> Self {
        let n = data.len();
        Self {
            x: data.features.to_f64(),
            labels: data.labels.clone(),
            n,
            dim: data.features.dim(),
            classes: data.n_classes,
            reg: 1.0 / (l2_strength * n as f64),
        }
    }

    /// Objective and (optionally) gradient at `theta = [W | b]`.
    fn eval(&self, theta: &[f64], want_grad: bool) -> (f64, Vec<f64>) {
        let (c, d) = (self.classes, self.dim);
        let (w, b) = theta.split_at(c * d);
        let mut grad = if want_grad {
            vec![0.0; theta.len()]
        } else {
            Vec::new()
        };
        let mut loss = 0.0;
        let mut z = vec![0.0; c];
        for i in 0..self.n {
            let x = &self.x[i * d..(i + 1) * d];
            for k in 0..c {
                z[k] = w[k * d..(k + 1) * d]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + b[k];
            }
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = z.iter().map(|v| libm::exp(v - max)).sum();
            let lse = max + libm::log(sum);
            let y = self.labels[i];
            loss += lse - z[y];
            if want_grad {
                for k in 0..c {
                    let p = libm::exp(z[k] - lse) - if k == y { 1.0 } else { 0.0 };
                    for (g, &xv) in grad[k * d..(k + 1) * d].iter_mut().zip(x) {
                        *g += p * xv;
                    }
                    grad[c * d + k] += p;
                }
            }
        }
        let inv_n = 1.0 / self.n as f64;
        let sq: f64 = w.iter().map(|v| v * v).sum();
        let objective = loss * inv_n + 0.5 * self.reg * sq;
        if want_grad {
            for g in grad.iter_mut() {
                *g *= inv_n;
            }
            for (g, wv) in grad[..c * d].iter_mut().zip(w) {
                *g += self.reg * wv;
            }
        }
        (objective, grad)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits a linear probe by full-batch gradient descent.
///
/// Minimizes mean cross-entropy plus `‖W‖² / (2 · C · n)` (bias not
/// penalized), where `C = cfg.l2_strength`. Each iteration starts from a
/// Barzilai–Borwein step length and backtracks until the Armijo condition
/// holds, so the objective never increases. Stops once the gradient
/// ∞-norm drops below `cfg.grad_tol` or after `cfg.max_iter` iterations.
pub fn logreg_fit(data: &LabeledFeatures, cfg: &ProbeConfig) -> Result<LogRegFit> {
    cfg.validate()?;
    if data.n_classes < 2 {
        return Err(Error::InvalidArgument {
            field: "n_classes",
            reason: "need at least two classes",
        });
    }
    if data.len() < data.n_classes {
        return Err(Error::InvalidArgument {
            field: "training rows",
            reason: "need at least one row per class",
        });
    }
    let problem = Problem::new(data, cfg.l2_strength);
    let n_params = data.n_classes * (problem.dim + 1);
    let mut theta = vec![0.0; n_params];
    let (mut f, mut g) = problem.eval(&theta, true);
    let mut trace = vec![f];
    let mut step_len = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iter {
        let gnorm = inf_norm(&g);
        if gnorm < cfg.grad_tol {
            converged = true;
            break;
        }
        if let Some((s, y)) = prev.take() {
            let sy = dot(&s, &y);
            if sy > 0.0 {
                step_len = (dot(&s, &s) / sy).clamp(1e-10, 1e10);
            } else {
                step_len *= 2.0;
            }
        }
        let gg = dot(&g, &g);
        let mut alpha = step_len;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let candidate: Vec<f64> = theta.iter().zip(&g).map(|(t, gv)| t - alpha * gv).collect();
            let (fc, gc) = problem.eval(&candidate, true);
            if fc <= f - ARMIJO_C * alpha * gg {
                accepted = Some((candidate, fc, gc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((next, f_next, g_next)) = accepted else {
            // no descent possible at machine precision
            break;
        };
        let s: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
        prev = Some((s, y));
        step_len = alpha;
        theta = next;
        f = f_next;
        g = g_next;
        trace.push(f);
        iterations += 1;
    }
    let grad_inf_norm = inf_norm(&g);
    converged |= grad_inf_norm < cfg.grad_tol;

    let (weight, bias) = theta.split_at(data.n_classes * problem.dim);
    Ok(LogRegFit {
        model: LogRegModel {
            n_classes: data.n_classes,
            dim: problem.dim,
            weight: weight.to_vec(),
            bias: bias.to_vec(),
            l2_strength: cfg.l2_strength,
        },
        iterations,
        grad_inf_norm,
        converged,
        objective_trace: trace,
    })
}

/// Highest-scoring class per row; ties go to the lowest class index.
pub fn logreg_predict(model: &LogRegModel, x: &EmbeddingMatrix) -> Result<Vec<usize>> {
    if x.dim() != model.dim {
        return Err(Error::ShapeMismatch {
            what: "probe input dim",
            expected: model.dim,
            found: x.dim(),
        });
    }
    Ok(x.iter_rows()
        .map(|row| {
            let scores = model.scores(row);
            let mut best = 0;
            for (k, &s) in scores.iter().enumerate().skip(1) {
                if s > scores[best] {
                    best = k;
                }
            }
            best
        })
        .collect())
}
