use core::f64::consts::PI;

use super::config::TrainConfig;
use crate::error::{Error, Result};

/// Peak learning rate: `devices × batch_per_device × numerator / denominator`.
pub fn effective_lr(cfg: &TrainConfig) -> f64 {
    (cfg.devices * cfg.batch_per_device) as f64 * cfg.base_lr_numerator / cfg.base_lr_denominator
}

/// Linear warmup from 0 over `warmup_epochs`, then half-cosine decay to 0.
///
/// With `W` warmup steps and `S` total steps: `peak · step / W` while
/// `step < W`, afterwards `peak / 2 · (1 + cos(π (step - W) / (S - W)))`.
pub fn cosine_warmup_lr(step: usize, steps_per_epoch: usize, cfg: &TrainConfig) -> Result<f64> {
    let total = cfg.epochs * steps_per_epoch;
    if step >= total {
        return Err(Error::StepOutOfRange { step, total });
    }
    let warmup = cfg.warmup_epochs * steps_per_epoch;
    let peak = effective_lr(cfg);
    if step < warmup {
        return Ok(peak * step as f64 / warmup as f64);
    }
    let progress = (step - warmup) as f64 / (total - warmup) as f64;
    Ok(0.5 * peak * (1.0 + libm::cos(PI * progress)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(devices: usize, batch: usize, num: f64, den: f64) -> TrainConfig {
        TrainConfig {
            devices,
            batch_per_device: batch,
            base_lr_numerator: num,
            base_lr_denominator: den,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn effective_lr_examples() {
        assert_eq!(effective_lr(&TrainConfig::default()), 2.734375e-5);
        assert_eq!(effective_lr(&cfg(1, 32768, 1.0, 32768.0)), 1.0);
        assert!((effective_lr(&cfg(2, 100, 1e-3, 1000.0)) - 2.0e-4).abs() < 1e-18);
    }

    #[test]
    fn warmup_then_cosine() {
        // W = 100, S = 1000, peak = 1
        let c = TrainConfig {
            epochs: 10,
            warmup_epochs: 1,
            ..cfg(1, 1, 1.0, 1.0)
        };
        assert_eq!(cosine_warmup_lr(0, 100, &c).unwrap(), 0.0);
        assert_eq!(cosine_warmup_lr(100, 100, &c).unwrap(), 1.0);
        assert!((cosine_warmup_lr(50, 100, &c).unwrap() - 0.5).abs() < 1e-15);
        assert!((cosine_warmup_lr(550, 100, &c).unwrap() - 0.5).abs() < 1e-9);
        assert_eq!(
            cosine_warmup_lr(1000, 100, &c),
            Err(Error::StepOutOfRange {
                step: 1000,
                total: 1000
            })
        );
    }

    #[test]
    fn no_warmup_starts_at_peak() {
        let c = TrainConfig {
            epochs: 2,
            warmup_epochs: 0,
            ..cfg(1, 1, 3.0, 1.0)
        };
        assert_eq!(cosine_warmup_lr(0, 5, &c).unwrap(), 3.0);
    }
}
