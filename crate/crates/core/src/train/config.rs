use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training hyperparameters. [`TrainConfig::default`] carries the
/// large-scale pretraining recipe (16 devices × 112 per device, τ = 0.07,
/// AdamW with weight decay 0.01, 10 epochs with one warmup epoch).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub temperature: f64,
    pub batch_per_device: usize,
    pub devices: usize,
    /// Learning rate per sample is `base_lr_numerator / base_lr_denominator`.
    pub base_lr_numerator: f64,
    pub base_lr_denominator: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub warmup_epochs: usize,
    /// Area fraction range for random resized crops.
    pub crop_scale_min: f64,
    pub crop_scale_max: f64,
    pub input_size: u32,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            temperature: 0.07,
            batch_per_device: 112,
            devices: 16,
            base_lr_numerator: 5.0e-4,
            base_lr_denominator: 32768.0,
            weight_decay: 0.01,
            epochs: 10,
            warmup_epochs: 1,
            crop_scale_min: 0.8,
            crop_scale_max: 1.0,
            input_size: 448,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn global_batch(&self) -> usize {
        self.devices * self.batch_per_device
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::NonPositiveTemperature(self.temperature));
        }
        let bad = |field, reason| Err(Error::InvalidArgument { field, reason });
        if self.global_batch() == 0 {
            return bad("batch_per_device × devices", "must be at least 1");
        }
        if !(self.base_lr_denominator > 0.0) || !(self.base_lr_numerator >= 0.0) {
            return bad("base_lr", "numerator must be ≥ 0 and denominator > 0");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay", "must be ≥ 0");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be at least 1");
        }
        if self.warmup_epochs >= self.epochs {
            return bad("warmup_epochs", "must be smaller than epochs");
        }
        if !(self.crop_scale_min > 0.0
            && self.crop_scale_min <= self.crop_scale_max
            && self.crop_scale_max <= 1.0)
        {
            return bad("crop_scale", "need 0 < min ≤ max ≤ 1");
        }
        if self.input_size == 0 {
            return bad("input_size", "must be at least 1");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam_beta", "betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps", "must be positive");
        }
        Ok(())
    }
}
