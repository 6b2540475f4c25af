//! Symmetric InfoNCE training of linear projection heads over frozen
//! features.

mod augment;
mod config;
mod fit;
mod head;
mod loss;
mod optim;
mod schedule;

pub use augment::random_resized_crop_plan;
pub use config::TrainConfig;
pub use fit::{fit, FitResult, StepRecord};
pub use head::{normalize_backward, project, HeadGrad, ProjectionHead};
pub use loss::{
    info_nce_grad, info_nce_grad_raw, info_nce_loss, info_nce_loss_raw, InfoNceGrad, InfoNceLoss,
};
pub use optim::{adamw_step, OptimizerState};
pub use schedule::{cosine_warmup_lr, effective_lr};
