use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rsvl_core::matrix::l2_normalize;
use rsvl_core::probe::{
    knn_classify, logreg_fit, logreg_predict, sample_k_shot, stratified_split, LabeledFeatures,
    Metric, ProbeConfig, Shots, DEFAULT_KNN_K,
};
use rsvl_core::retrieval::{retrieval_report, CaptionMap, RetrievalReport};
use rsvl_core::semloc::{
    prob_centroid, semloc_report, window_grid, GroundTruthRegion, SceneWindows, SemLocMap,
    SemLocWeights,
};
use rsvl_core::zeroshot::{
    build_prompts, top1_accuracy, zeroshot_classify, DatasetAccuracy, PromptTemplate,
    ZeroShotReport,
};
use rsvl_core::{CropRect, EmbeddingMatrix};
use serde::{Deserialize, Serialize};

use super::common::{pct, table, write_file, Finished, Inputs};
use crate::error::Error;

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct RetrievalArgs {
    /// Image embeddings (RSEB)
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub images: PathBuf,

    /// Caption embeddings (RSEB)
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub texts: PathBuf,

    /// Id sidecar for the caption rows; each label is the row of the
    /// caption's image. Without it, caption i belongs to image i
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub text_ids: Option<PathBuf>,

    #[arg(
        long,
        value_name = "FILE",
        default_value = "eval-retrieval-report.json"
    )]
    #[serde(skip)]
    pub report: PathBuf,
}

#[derive(Debug, Serialize)]
struct RetrievalOutput {
    n_images: usize,
    n_captions: usize,
    #[serde(flatten)]
    recalls: RetrievalReport,
}

pub(super) fn retrieval(
    command: &str,
    args: RetrievalArgs,
    mut inputs: Inputs,
    out: &mut dyn Write,
) -> Result<(), Error> {
    let images = inputs.rseb("images", &args.images)?;
    let texts = inputs.rseb("texts", &args.texts)?;
    let map = match &args.text_ids {
        Some(path) => {
            let labels = inputs.labels("text_ids", path, texts.rows())?;
            CaptionMap::new(images.rows(), labels).map_err(|e| Error::Invalid {
                path: path.clone(),
                reason: e.to_string(),
            })?
        }
        None if images.rows() == texts.rows() => CaptionMap::one_to_one(images.rows()),
        None => {
            return Err(Error::Argument {
                flag: "text-ids",
                reason: format!(
                    "required when image and caption row counts differ ({} vs {})",
                    images.rows(),
                    texts.rows()
                ),
            })
        }
    };
    let recalls = retrieval_report(&images, &texts, &map)?;
    let r = &recalls;
    let rows = vec![
        vec![
            "image→text".into(),
            pct(r.r1_i2t),
            pct(r.r5_i2t),
            pct(r.r10_i2t),
        ],
        vec![
            "text→image".into(),
            pct(r.r1_t2i),
            pct(r.r5_t2i),
            pct(r.r10_t2i),
        ],
    ];
    let mut text = table(&["direction", "R@1", "R@5", "R@10"], &rows);
    text.push_str(&format!("mR {}\n", pct(r.mean_recall)));
    Finished {
        command,
        report: RetrievalOutput {
            n_images: images.rows(),
            n_captions: texts.rows(),
            recalls,
        },
        parameters: &args,
        seed: None,
        inputs,
        report_path: &args.report,
        table: text,
    }
    .emit(out)
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct ZeroShotArgs {
    /// Dataset directory holding images.rseb, images.ids.jsonl (labels),
    /// classes.json (array of class names) and classes.rseb (one prompt
    /// embedding per class). Repeat for several datasets
    #[arg(long = "dataset", value_name = "DIR", required = true)]
    #[serde(skip)]
    pub datasets: Vec<PathBuf>,

    /// Preset name (a, the, satellite-a, satellite-the) or a pattern with
    /// one "{class name}" placeholder. satellite-a is
    /// "a satellite image of {class name}"
    #[arg(long, default_value = "satellite-a")]
    pub template: String,

    #[arg(long, value_name = "FILE", default_value = "eval-zeroshot-report.json")]
    #[serde(skip)]
    pub report: PathBuf,
}

#[derive(Debug, Serialize)]
struct ZeroShotDataset {
    dataset: String,
    top1: f64,
    n_images: usize,
    n_classes: usize,
    prompts: Vec<String>,
}

#[derive(Debug, Serialize)]
struct ZeroShotOutput {
    template: String,
    datasets: Vec<ZeroShotDataset>,
    average: f64,
}

struct ZeroShotInput {
    name: String,
    images: EmbeddingMatrix,
    labels: Vec<usize>,
    classes: Vec<String>,
    class_emb: EmbeddingMatrix,
}

fn dataset_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

fn load_zeroshot(inputs: &mut Inputs, dir: &Path) -> Result<ZeroShotInput, Error> {
    let name = dataset_name(dir);
    let images = inputs.rseb(&format!("{name}/images"), &dir.join("images.rseb"))?;
    let ids_path = dir.join("images.ids.jsonl");
    let labels = inputs.labels(&format!("{name}/images.ids"), &ids_path, images.rows())?;
    let classes: Vec<String> =
        inputs.json(&format!("{name}/classes"), &dir.join("classes.json"))?;
    let class_path = dir.join("classes.rseb");
    let class_emb = inputs.rseb(&format!("{name}/class_embeddings"), &class_path)?;
    if class_emb.rows() != classes.len() {
        return Err(Error::Invalid {
            path: class_path,
            reason: format!(
                "{} rows for {} class names",
                class_emb.rows(),
                classes.len()
            ),
        });
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= classes.len()) {
        return Err(Error::Invalid {
            path: ids_path,
            reason: format!("label {l} out of range for {} classes", classes.len()),
        });
    }
    Ok(ZeroShotInput {
        name,
        images,
        labels,
        classes,
        class_emb,
    })
}

fn resolve_template(template: &str) -> Result<PromptTemplate, Error> {
    match PromptTemplate::preset(template) {
        Some(t) => Ok(t),
        None => PromptTemplate::new(template).map_err(|e| Error::Argument {
            flag: "template",
            reason: e.to_string(),
        }),
    }
}

pub(super) fn zeroshot(
    command: &str,
    args: ZeroShotArgs,
    mut inputs: Inputs,
    out: &mut dyn Write,
) -> Result<(), Error> {
    let template = resolve_template(&args.template)?;
    let loaded = args
        .datasets
        .iter()
        .map(|dir| load_zeroshot(&mut inputs, dir))
        .collect::<Result<Vec<_>, _>>()?;

    let mut datasets = Vec::with_capacity(loaded.len());
    for d in loaded {
        let prompts = build_prompts(&d.classes, &template)?;
        let images = l2_normalize(&d.images)?;
        let classes = l2_normalize(&d.class_emb)?;
        let pred = zeroshot_classify(&images, &classes)?;
        datasets.push(ZeroShotDataset {
            top1: top1_accuracy(&pred, &d.labels)?,
            dataset: d.name,
            n_images: d.images.rows(),
            n_classes: d.classes.len(),
            prompts,
        });
    }
    let summary = ZeroShotReport::new(
        datasets
            .iter()
            .map(|d| DatasetAccuracy {
                dataset: d.dataset.clone(),
                top1: d.top1,
            })
            .collect(),
    )?;
    let mut rows: Vec<Vec<String>> = datasets
        .iter()
        .map(|d| vec![d.dataset.clone(), pct(d.top1)])
        .collect();
    rows.push(vec!["average".into(), pct(summary.average)]);
    Finished {
        command,
        report: ZeroShotOutput {
            template: template.pattern().to_string(),
            datasets,
            average: summary.average,
        },
        parameters: &args,
        seed: None,
        inputs,
        report_path: &args.report,
        table: table(&["dataset", "top-1"], &rows),
    }
    .emit(out)
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct SemLocArgs {
    /// Window embeddings in window-grid order: row-major over window
    /// positions, top-left first (RSEB)
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub windows: PathBuf,

    /// Query embeddings (RSEB)
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub query: PathBuf,

    /// Row of the query file to use
    #[arg(long, default_value_t = 0)]
    pub query_row: usize,

    /// Ground truth as {"scene": id, "rects": [[x, y, w, h], ...]} in pixels
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub gt: PathBuf,

    #[arg(long, value_name = "PIXELS")]
    pub scene_width: u32,

    #[arg(long, value_name = "PIXELS")]
    pub scene_height: u32,

    /// Square window side
    #[arg(long, value_name = "PIXELS")]
    pub window: u32,

    #[arg(long, value_name = "PIXELS")]
    pub stride: u32,

    /// Side of one map cell
    #[arg(long, value_name = "PIXELS")]
    pub cell: u32,

    /// Metric weights w_su,w_as,w_da summing to 1 [default: 1/3 each]
    #[arg(long, value_delimiter = ',', value_name = "W")]
    pub weights: Vec<f64>,

    /// Also write the map as an 8-bit PGM image
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub pgm: Option<PathBuf>,

    #[arg(long, value_name = "FILE", default_value = "eval-semloc-report.json")]
    #[serde(skip)]
    pub report: PathBuf,
}

#[derive(Debug, Deserialize)]
struct GroundTruthFile {
    scene: serde_json::Value,
    rects: Vec<[u32; 4]>,
}

#[derive(Debug, Serialize)]
struct SemLocOutput {
    scene: serde_json::Value,
    r_su: f64,
    r_as: f64,
    r_da: f64,
    r_mi: f64,
    weights: SemLocWeights,
    n_windows: usize,
    map_width: usize,
    map_height: usize,
    gt_cells: Vec<CropRect>,
    gt_centroid: [f64; 2],
    map_centroid: [f64; 2],
}

/// Smallest cell rectangle covering a pixel rectangle.
fn pixel_rect_to_cells(r: [u32; 4], cell: u32) -> CropRect {
    let [x, y, w, h] = r;
    let (x0, y0) = (x / cell, y / cell);
    let (x1, y1) = ((x + w).div_ceil(cell), (y + h).div_ceil(cell));
    CropRect::new(x0, y0, x1 - x0, y1 - y0)
}

fn resolve_weights(w: &[f64]) -> Result<SemLocWeights, Error> {
    match w {
        [] => Ok(SemLocWeights::default()),
        &[su, as_, da] => SemLocWeights::new(su, as_, da).map_err(|e| Error::Argument {
            flag: "weights",
            reason: e.to_string(),
        }),
        _ => Err(Error::Argument {
            flag: "weights",
            reason: format!("expected 3 values, got {}", w.len()),
        }),
    }
}

/// Binary PGM (P5) with 8-bit samples.
pub fn pgm_bytes(map: &SemLocMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", map.width(), map.height()).into_bytes();
    out.extend(map.to_gray8());
    out
}

pub(super) fn semloc(
    command: &str,
    args: SemLocArgs,
    mut inputs: Inputs,
    out: &mut dyn Write,
) -> Result<(), Error> {
    let weights = resolve_weights(&args.weights)?;
    if args.cell == 0 {
        return Err(Error::Argument {
            flag: "cell",
            reason: "must be at least 1".into(),
        });
    }
    let rects = window_grid(
        args.scene_width,
        args.scene_height,
        args.window,
        args.stride,
    )?;
    let windows = inputs.rseb("windows", &args.windows)?;
    if windows.rows() != rects.len() {
        return Err(Error::Invalid {
            path: args.windows.clone(),
            reason: format!(
                "{} rows but the window grid has {} windows",
                windows.rows(),
                rects.len()
            ),
        });
    }
    let queries = inputs.rseb("query", &args.query)?;
    if args.query_row >= queries.rows() {
        return Err(Error::Argument {
            flag: "query-row",
            reason: format!(
                "{} is out of range for {} rows",
                args.query_row,
                queries.rows()
            ),
        });
    }
    let gt_file: GroundTruthFile = inputs.json("gt", &args.gt)?;
    if let Some(r) = gt_file.rects.iter().find(|[x, y, w, h]| {
        *w == 0 || *h == 0 || x + w > args.scene_width || y + h > args.scene_height
    }) {
        return Err(Error::Invalid {
            path: args.gt.clone(),
            reason: format!(
                "rect {r:?} is empty or leaves the {}×{} scene",
                args.scene_width, args.scene_height
            ),
        });
    }
    let (gw, gh) = (
        args.scene_width.div_ceil(args.cell) as usize,
        args.scene_height.div_ceil(args.cell) as usize,
    );
    let gt_cells: Vec<CropRect> = gt_file
        .rects
        .iter()
        .map(|&r| pixel_rect_to_cells(r, args.cell))
        .collect();
    let gt = GroundTruthRegion::new(gw, gh, gt_cells.clone()).map_err(|e| Error::Invalid {
        path: args.gt.clone(),
        reason: e.to_string(),
    })?;

    let query = l2_normalize(&queries.select_rows(&[args.query_row])?)?;
    let scene = SceneWindows {
        scene_w: args.scene_width,
        scene_h: args.scene_height,
        cell: args.cell,
        rects,
        embeddings: l2_normalize(&windows)?,
    };
    let result = semloc_report(&scene, query.row(0), &gt, &weights)?;
    if let Some(path) = &args.pgm {
        write_file(path, &pgm_bytes(&result.map))?;
    }
    let s = result.scores;
    let (gx, gy) = gt.centroid();
    let (mx, my) = prob_centroid(&result.map);
    let rows = vec![vec![pct(s.r_su), pct(s.r_as), pct(s.r_da), pct(s.r_mi)]];
    Finished {
        command,
        report: SemLocOutput {
            scene: gt_file.scene,
            r_su: s.r_su,
            r_as: s.r_as,
            r_da: s.r_da,
            r_mi: s.r_mi,
            weights,
            n_windows: scene.rects.len(),
            map_width: result.map.width(),
            map_height: result.map.height(),
            gt_cells,
            gt_centroid: [gx, gy],
            map_centroid: [mx, my],
        },
        parameters: &args,
        seed: None,
        inputs,
        report_path: &args.report,
        table: table(&["R_su", "R_as", "R_da", "R_mi"], &rows),
    }
    .emit(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeMethod {
    /// Multinomial logistic regression
    Linear,
    /// k-nearest-neighbour majority vote
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Euclidean,
    Cosine,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::Cosine => Metric::Cosine,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct ProbeArgs {
    /// Frozen image features (RSEB)
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub features: PathBuf,

    /// Id sidecar with the class label of every feature row
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub ids: PathBuf,

    /// Held-out features; without them the labelled set is split
    #[arg(long, value_name = "FILE", requires = "test_ids")]
    #[serde(skip)]
    pub test_features: Option<PathBuf>,

    #[arg(long, value_name = "FILE", requires = "test_features")]
    #[serde(skip)]
    pub test_ids: Option<PathBuf>,

    /// Name recorded in the report [default: file stem of --features]
    #[arg(long)]
    pub dataset: Option<String>,

    /// Training examples per class
    #[arg(long, default_value = "full", value_parser = ["1", "4", "8", "16", "32", "full"])]
    pub shots: String,

    #[arg(long, value_enum, default_value_t = ProbeMethod::Linear)]
    pub method: ProbeMethod,

    /// Neighbours for --method knn
    #[arg(long, default_value_t = DEFAULT_KNN_K)]
    pub k: usize,

    /// Distance for --method knn
    #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
    pub metric: MetricArg,

    /// Train fraction of the per-class stratified split
    #[arg(long, default_value_t = 0.8)]
    pub split_ratio: f64,

    /// Inverse L2 regularization strength C
    #[arg(long, default_value_t = 1.0)]
    pub l2_strength: f64,

    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,

    /// Stop once the gradient's largest entry is below this
    #[arg(long, default_value_t = 1e-6)]
    pub grad_tol: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, value_name = "FILE", default_value = "eval-probe-report.json")]
    #[serde(skip)]
    pub report: PathBuf,
}

#[derive(Debug, Serialize)]
struct ProbeOutput {
    dataset: String,
    shots: Shots,
    accuracy: f64,
    method: ProbeMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metric: Option<MetricArg>,
    n_classes: usize,
    n_train: usize,
    n_test: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grad_inf_norm: Option<f64>,
}

pub(super) fn probe(
    command: &str,
    args: ProbeArgs,
    mut inputs: Inputs,
    out: &mut dyn Write,
) -> Result<(), Error> {
    let shots: Shots = args.shots.parse()?;
    let cfg = ProbeConfig {
        shots,
        split_ratio: args.split_ratio,
        seed: args.seed,
        l2_strength: args.l2_strength,
        max_iter: args.max_iter,
        grad_tol: args.grad_tol,
    };
    cfg.validate()?;
    if args.k == 0 {
        return Err(Error::Argument {
            flag: "k",
            reason: "must be at least 1".into(),
        });
    }
    let features = inputs.rseb("features", &args.features)?;
    let labels = inputs.labels("ids", &args.ids, features.rows())?;
    let test = match (&args.test_features, &args.test_ids) {
        (Some(f), Some(i)) => {
            let m = inputs.rseb("test_features", f)?;
            let l = inputs.labels("test_ids", i, m.rows())?;
            Some((m, l))
        }
        _ => None,
    };
    let n_classes = labels
        .iter()
        .chain(test.iter().flat_map(|(_, l)| l))
        .max()
        .map_or(0, |&m| m + 1);
    let labeled =
        LabeledFeatures::new(features, labels, n_classes).map_err(|e| Error::Invalid {
            path: args.ids.clone(),
            reason: e.to_string(),
        })?;
    let (train, test) = match test {
        Some((m, l)) => (labeled, LabeledFeatures::new(m, l, n_classes)?),
        None => {
            let split = stratified_split(&labeled.labels, cfg.split_ratio, cfg.seed)?;
            (labeled.subset(&split.train)?, labeled.subset(&split.test)?)
        }
    };
    let train = match shots {
        Shots::Full => train,
        Shots::K(k) => sample_k_shot(&train, k, cfg.seed)?,
    };

    let dataset = args.dataset.clone().unwrap_or_else(|| {
        args.features
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let mut report = ProbeOutput {
        dataset,
        shots,
        accuracy: 0.0,
        method: args.method,
        k: None,
        metric: None,
        n_classes,
        n_train: train.len(),
        n_test: test.len(),
        converged: None,
        iterations: None,
        grad_inf_norm: None,
    };
    let pred = match args.method {
        ProbeMethod::Linear => {
            let fitted = logreg_fit(&train, &cfg)?;
            report.converged = Some(fitted.converged);
            report.iterations = Some(fitted.iterations);
            report.grad_inf_norm = Some(fitted.grad_inf_norm);
            logreg_predict(&fitted.model, &test.features)?
        }
        ProbeMethod::Knn => {
            report.k = Some(args.k);
            report.metric = Some(args.metric);
            knn_classify(&train, &test.features, args.k, args.metric.into())?
        }
    };
    report.accuracy = top1_accuracy(&pred, &test.labels)?;
    let method = match args.method {
        ProbeMethod::Linear => "linear",
        ProbeMethod::Knn => "knn",
    };
    let rows = vec![vec![
        report.dataset.clone(),
        method.into(),
        shots.to_string(),
        pct(report.accuracy),
    ]];
    Finished {
        command,
        report,
        parameters: &args,
        seed: Some(args.seed),
        inputs,
        report_path: &args.report,
        table: table(&["dataset", "method", "shots", "accuracy"], &rows),
    }
    .emit(out)
}
