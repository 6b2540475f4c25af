use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use rsvl_core::train::{effective_lr, fit, ProjectionHead, TrainConfig};
use rsvl_core::EmbeddingMatrix;
use serde::Serialize;

use super::common::{create_dir, table, Finished, Inputs};
use crate::error::Error;
use crate::jsonl;
use crate::rseb;

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    /// Image features, one row per image (RSEB)
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub image_features: PathBuf,

    /// Text features, one row per caption (RSEB)
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub text_features: PathBuf,

    /// Id sidecar for the text rows; each label is the row of the paired
    /// image. Without it, text row i pairs with image row i
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub text_ids: Option<PathBuf>,

    /// Output width of both projection heads
    #[arg(long, default_value_t = 512)]
    pub out_dim: usize,

    /// Softmax temperature
    #[arg(long, default_value_t = 0.07)]
    pub temperature: f64,

    #[arg(long, default_value_t = 112)]
    pub batch_per_device: usize,

    /// Simulated device count; the global batch is devices × batch-per-device
    #[arg(long, default_value_t = 16)]
    pub devices: usize,

    /// Peak learning rate is global batch × numerator / denominator
    #[arg(long, default_value_t = 5.0e-4)]
    pub base_lr_numerator: f64,

    #[arg(long, default_value_t = 32768.0)]
    pub base_lr_denominator: f64,

    /// Decoupled AdamW weight decay
    #[arg(long, default_value_t = 0.01)]
    pub weight_decay: f64,

    #[arg(long, default_value_t = 10)]
    pub epochs: usize,

    /// Epochs of linear warmup before cosine decay
    #[arg(long, default_value_t = 1)]
    pub warmup_epochs: usize,

    /// Smallest area fraction for random resized crops
    #[arg(long, default_value_t = 0.8)]
    pub crop_scale_min: f64,

    #[arg(long, default_value_t = 1.0)]
    pub crop_scale_max: f64,

    /// Encoder input resolution in pixels
    #[arg(long, default_value_t = 448)]
    pub input_size: u32,

    #[arg(long, default_value_t = 0.9)]
    pub adam_beta1: f64,

    #[arg(long, default_value_t = 0.999)]
    pub adam_beta2: f64,

    #[arg(long, default_value_t = 1e-8)]
    pub adam_eps: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Directory for the heads (RSEB) and the per-step history (JSONL)
    #[arg(long, value_name = "DIR")]
    #[serde(skip)]
    pub out_dir: PathBuf,

    #[arg(long, value_name = "FILE", default_value = "train-report.json")]
    #[serde(skip)]
    pub report: PathBuf,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            temperature: self.temperature,
            batch_per_device: self.batch_per_device,
            devices: self.devices,
            base_lr_numerator: self.base_lr_numerator,
            base_lr_denominator: self.base_lr_denominator,
            weight_decay: self.weight_decay,
            epochs: self.epochs,
            warmup_epochs: self.warmup_epochs,
            crop_scale_min: self.crop_scale_min,
            crop_scale_max: self.crop_scale_max,
            input_size: self.input_size,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Serialize)]
struct TrainReport {
    n_images: usize,
    n_texts: usize,
    n_pairs: usize,
    image_dim: usize,
    text_dim: usize,
    out_dim: usize,
    global_batch: usize,
    steps_per_epoch: usize,
    total_steps: usize,
    peak_lr: f64,
    first_loss: f64,
    final_loss: f64,
    final_lr: f64,
    outputs: Vec<String>,
}

const OUTPUTS: [&str; 5] = [
    "image_head.weight.rseb",
    "image_head.bias.rseb",
    "text_head.weight.rseb",
    "text_head.bias.rseb",
    "history.jsonl",
];

fn head_matrices(head: &ProjectionHead) -> Result<(EmbeddingMatrix, EmbeddingMatrix), Error> {
    Ok((
        EmbeddingMatrix::new(head.out_dim(), head.in_dim(), head.weight().to_vec())?,
        EmbeddingMatrix::new(1, head.out_dim(), head.bias().to_vec())?,
    ))
}

fn write_rseb(path: &Path, m: &EmbeddingMatrix) -> Result<(), Error> {
    rseb::write_embeddings(m, path).map_err(|e| Error::Output {
        path: path.to_path_buf(),
        source: match e {
            rseb::RsebError::Io(io) => io,
            other => std::io::Error::other(other.to_string()),
        },
    })
}

pub(super) fn run(
    command: &str,
    args: TrainArgs,
    mut inputs: Inputs,
    out: &mut dyn Write,
) -> Result<(), Error> {
    let cfg = args.config();
    cfg.validate()?;
    let images = inputs.rseb("image_features", &args.image_features)?;
    let texts = inputs.rseb("text_features", &args.text_features)?;
    let pairs: Vec<(usize, usize)> = match &args.text_ids {
        Some(path) => {
            let labels = inputs.labels("text_ids", path, texts.rows())?;
            if let Some((t, &i)) = labels.iter().enumerate().find(|(_, &i)| i >= images.rows()) {
                return Err(Error::Invalid {
                    path: path.clone(),
                    reason: format!(
                        "row {t} pairs with image row {i}, but there are {} images",
                        images.rows()
                    ),
                });
            }
            labels
                .into_iter()
                .enumerate()
                .map(|(t, i)| (i, t))
                .collect()
        }
        None => {
            if images.rows() != texts.rows() {
                return Err(Error::Argument {
                    flag: "text-ids",
                    reason: format!(
                        "required when image and text row counts differ ({} vs {})",
                        images.rows(),
                        texts.rows()
                    ),
                });
            }
            (0..images.rows()).map(|i| (i, i)).collect()
        }
    };
    if pairs.len() < cfg.global_batch() {
        return Err(Error::Argument {
            flag: "batch-per-device",
            reason: format!(
                "global batch {} exceeds the {} training pairs",
                cfg.global_batch(),
                pairs.len()
            ),
        });
    }

    let result = fit(&images, &texts, &pairs, args.out_dim, &cfg)?;

    create_dir(&args.out_dir)?;
    let (iw, ib) = head_matrices(&result.image_head)?;
    let (tw, tb) = head_matrices(&result.text_head)?;
    for (name, m) in OUTPUTS.iter().zip([&iw, &ib, &tw, &tb]) {
        write_rseb(&args.out_dir.join(name), m)?;
    }
    let history_path = args.out_dir.join(OUTPUTS[4]);
    jsonl::write(&history_path, &result.history).map_err(|source| Error::Output {
        path: history_path.clone(),
        source,
    })?;

    let first = result.history.first().expect("at least one step");
    let last = result.history.last().expect("at least one step");
    let report = TrainReport {
        n_images: images.rows(),
        n_texts: texts.rows(),
        n_pairs: pairs.len(),
        image_dim: images.dim(),
        text_dim: texts.dim(),
        out_dim: args.out_dim,
        global_batch: cfg.global_batch(),
        steps_per_epoch: result.steps_per_epoch,
        total_steps: result.history.len(),
        peak_lr: effective_lr(&cfg),
        first_loss: first.loss,
        final_loss: last.loss,
        final_lr: last.lr,
        outputs: OUTPUTS.iter().map(|s| s.to_string()).collect(),
    };
    let rows = vec![
        vec!["pairs".into(), report.n_pairs.to_string()],
        vec!["global batch".into(), report.global_batch.to_string()],
        vec!["steps".into(), report.total_steps.to_string()],
        vec!["peak lr".into(), format!("{:.3e}", report.peak_lr)],
        vec!["first loss".into(), format!("{:.4}", report.first_loss)],
        vec!["final loss".into(), format!("{:.4}", report.final_loss)],
    ];
    Finished {
        command,
        report,
        parameters: &args,
        seed: Some(args.seed),
        inputs,
        report_path: &args.report,
        table: table(&["train", "value"], &rows),
    }
    .emit(out)
}
