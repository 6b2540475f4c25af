use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::head::{normalize_backward, normalize_rows, ProjectionHead};
use super::loss::info_nce_grad_raw;
use super::optim::{adamw_step, OptimizerState};
use super::schedule::cosine_warmup_lr;
use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;
use crate::rng::seeded;

/// One optimizer step. `loss*` are measured on the batch before the update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub loss_i2t: f64,
    pub loss_t2i: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub image_head: ProjectionHead,
    pub text_head: ProjectionHead,
    pub history: Vec<StepRecord>,
    pub steps_per_epoch: usize,
}

/// Trains an image head and a text head with symmetric InfoNCE.
///
/// `pairs[k] = (image_row, text_row)` lists the positive pairs. Each epoch
/// shuffles the pairs and walks them in global batches of
/// `devices × batch_per_device`; the trailing partial batch is dropped so
/// every step sees the same number of negatives. Each step projects both
/// sides, L2-normalizes, backpropagates the InfoNCE gradient through the
/// normalization into both heads and applies AdamW at the scheduled rate.
///
/// Runs are bit-reproducible for a fixed `cfg.seed`: head initialisation and
/// shuffles come from the same seeded generator and all reductions are
/// sequential.
pub fn fit(
    image_feats: &EmbeddingMatrix,
    text_feats: &EmbeddingMatrix,
    pairs: &[(usize, usize)],
    out_dim: usize,
    cfg: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    if out_dim == 0 {
        return Err(Error::InvalidArgument {
            field: "out_dim",
            reason: "must be at least 1",
        });
    }
    for &(i, t) in pairs {
        if i >= image_feats.rows() {
            return Err(Error::ShapeMismatch {
                what: "pair image index",
                expected: image_feats.rows(),
                found: i,
            });
        }
        if t >= text_feats.rows() {
            return Err(Error::ShapeMismatch {
                what: "pair text index",
                expected: text_feats.rows(),
                found: t,
            });
        }
    }
    let batch = cfg.global_batch();
    let steps_per_epoch = pairs.len() / batch;
    if steps_per_epoch == 0 {
        return Err(Error::InvalidArgument {
            field: "global batch",
            reason: "larger than the number of training pairs",
        });
    }

    let mut rng = seeded(cfg.seed);
    let mut image_head = ProjectionHead::random(out_dim, image_feats.dim(), &mut rng);
    let mut text_head = ProjectionHead::random(out_dim, text_feats.dim(), &mut rng);
    let mut image_state = OptimizerState::new(&image_head);
    let mut text_state = OptimizerState::new(&text_head);

    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs * steps_per_epoch);
    let mut step = 0;
    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks_exact(batch) {
            let lr = cosine_warmup_lr(step, steps_per_epoch, cfg)?;
            let image_rows: Vec<usize> = chunk.iter().map(|&k| pairs[k].0).collect();
            let text_rows: Vec<usize> = chunk.iter().map(|&k| pairs[k].1).collect();

            let image_side = Side::forward(&image_head, image_feats, &image_rows)?;
            let text_side = Side::forward(&text_head, text_feats, &text_rows)?;
            let (loss, grad) = info_nce_grad_raw(
                &image_side.unit,
                &text_side.unit,
                batch,
                out_dim,
                cfg.temperature,
            )?;

            let image_grad = image_side.backward(&image_head, &grad.images, out_dim);
            let text_grad = text_side.backward(&text_head, &grad.texts, out_dim);
            adamw_step(&mut image_head, &image_grad, &mut image_state, lr, cfg)?;
            adamw_step(&mut text_head, &text_grad, &mut text_state, lr, cfg)?;
            debug_assert!(image_head.is_finite() && text_head.is_finite());

            history.push(StepRecord {
                step,
                lr,
                loss: loss.loss,
                loss_i2t: loss.loss_i2t,
                loss_t2i: loss.loss_t2i,
            });
            step += 1;
        }
    }

    Ok(FitResult {
        image_head,
        text_head,
        history,
        steps_per_epoch,
    })
}

/// Cached activations for one modality within a step.
struct Side {
    inputs: Vec<f64>,
    unit: Vec<f64>,
    norms: Vec<f64>,
}

impl Side {
    fn forward(head: &ProjectionHead, feats: &EmbeddingMatrix, rows: &[usize]) -> Result<Self> {
        let mut inputs = Vec::with_capacity(rows.len() * feats.dim());
        for &r in rows {
            inputs.extend(feats.row(r).iter().map(|&v| f64::from(v)));
        }
        let mut unit = head.forward_f64(&inputs, rows.len());
        let norms = normalize_rows(&mut unit, rows.len(), head.out_dim())?;
        Ok(Self {
            inputs,
            unit,
            norms,
        })
    }

    fn backward(
        &self,
        head: &ProjectionHead,
        grad_unit: &[f64],
        out_dim: usize,
    ) -> super::head::HeadGrad {
        let grad_z = normalize_backward(&self.unit, &self.norms, grad_unit, out_dim);
        head.backward(&self.inputs, &grad_z, self.norms.len())
    }
}
