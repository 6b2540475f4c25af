use alloc::vec;
use alloc::vec::Vec;

use super::config::TrainConfig;
use super::head::{HeadGrad, ProjectionHead};
use crate::error::{Error, Result};

/// AdamW moment estimates for one [`ProjectionHead`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m_weight: Vec<f64>,
    pub v_weight: Vec<f64>,
    pub m_bias: Vec<f64>,
    pub v_bias: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(head: &ProjectionHead) -> Self {
        let (w, b) = (head.weight().len(), head.bias().len());
        Self {
            m_weight: vec![0.0; w],
            v_weight: vec![0.0; w],
            m_bias: vec![0.0; b],
            v_bias: vec![0.0; b],
            step: 0,
        }
    }
}

/// One AdamW update with decoupled weight decay.
///
/// Each parameter first shrinks by `lr · weight_decay · p`, then moves by
/// `lr · m̂ / (sqrt(v̂) + eps)` with bias-corrected moments. Decay applies to
/// the bias as well as the weight.
pub fn adamw_step(
    head: &mut ProjectionHead,
    grads: &HeadGrad,
    state: &mut OptimizerState,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    for (what, expected, found) in [
        ("weight gradient", head.weight.len(), grads.weight.len()),
        ("bias gradient", head.bias.len(), grads.bias.len()),
        ("weight moments", head.weight.len(), state.m_weight.len()),
        ("weight moments", head.weight.len(), state.v_weight.len()),
        ("bias moments", head.bias.len(), state.m_bias.len()),
        ("bias moments", head.bias.len(), state.v_bias.len()),
    ] {
        if expected != found {
            return Err(Error::ShapeMismatch {
                what,
                expected,
                found,
            });
        }
    }

    state.step += 1;
    let t = state.step as f64;
    let correction1 = 1.0 - libm::pow(cfg.adam_beta1, t);
    let correction2 = 1.0 - libm::pow(cfg.adam_beta2, t);
    let hyper = Hyper {
        lr,
        decay: lr * cfg.weight_decay,
        beta1: cfg.adam_beta1,
        beta2: cfg.adam_beta2,
        eps: cfg.adam_eps,
        correction1,
        correction2,
    };
    hyper.update(
        &mut head.weight,
        &grads.weight,
        &mut state.m_weight,
        &mut state.v_weight,
    );
    hyper.update(
        &mut head.bias,
        &grads.bias,
        &mut state.m_bias,
        &mut state.v_bias,
    );
    Ok(())
}

struct Hyper {
    lr: f64,
    decay: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    correction1: f64,
    correction2: f64,
}

impl Hyper {
    fn update(&self, params: &mut [f32], grads: &[f64], m: &mut [f64], v: &mut [f64]) {
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m).zip(v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / self.correction1;
            let v_hat = *v / self.correction2;
            let mut x = f64::from(*p);
            x -= self.decay * x;
            x -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
            *p = x as f32;
        }
    }
}
