#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rsvl::ids::IdRecord;
use rsvl::{jsonl, rseb};
use rsvl_core::rng::seeded;
use rsvl_core::EmbeddingMatrix;
use serde_json::Value;

pub struct CliRun {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli(args: &[&str]) -> CliRun {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("rsvl").chain(args.iter().copied());
    let code = rsvl::cli::run(argv, &mut out, &mut err);
    CliRun {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn write_matrix(path: &Path, m: &EmbeddingMatrix) {
    rseb::write_embeddings(m, path).unwrap();
}

pub fn write_labels(path: &Path, labels: &[usize]) {
    let records: Vec<IdRecord> = labels
        .iter()
        .enumerate()
        .map(|(row, &l)| IdRecord {
            row,
            id: format!("item{row}"),
            label: Some(l),
        })
        .collect();
    jsonl::write(path, &records).unwrap();
}

pub fn random_matrix(rows: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = seeded(seed);
    EmbeddingMatrix::new(
        rows,
        dim,
        (0..rows * dim)
            .map(|_| rng.gen_range(-1.0f32..1.0))
            .collect(),
    )
    .unwrap()
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

pub fn schema_path(command: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{command}.schema.json"))
}

/// Validation errors of `report` against the shipped schema for `command`.
pub fn schema_errors(command: &str, report: &Value) -> Vec<String> {
    let schema: Value = read_json(&schema_path(command));
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    validator
        .iter_errors(report)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect()
}

/// Report JSON without the `metadata` block, for byte comparison.
pub fn without_metadata(path: &Path) -> String {
    let mut v = read_json(path);
    v.as_object_mut().unwrap().remove("metadata");
    serde_json::to_string(&v).unwrap()
}

/// Scaled 2-d blobs: class c centered on a well-separated point.
pub fn blobs(n: usize, classes: usize, spread: f32, seed: u64) -> (EmbeddingMatrix, Vec<usize>) {
    let centers = [(-4.0f32, 0.0f32), (4.0, 0.0), (0.0, 5.0), (0.0, -5.0)];
    let mut rng = seeded(seed);
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        let (cx, cy) = centers[c];
        data.push(cx + rng.gen_range(-spread..spread));
        data.push(cy + rng.gen_range(-spread..spread));
        labels.push(c);
    }
    (EmbeddingMatrix::new(n, 2, data).unwrap(), labels)
}

/// Writes every fixture the CLI subcommands need under `dir` and returns
/// argument lists for one run of each subcommand (reports excluded).
pub struct Fixtures {
    pub dir: PathBuf,
}

impl Fixtures {
    pub fn new(dir: &Path) -> Self {
        let f = Self {
            dir: dir.to_path_buf(),
        };
        f.retrieval();
        f.zeroshot();
        f.semloc();
        f.probe();
        f.manifests();
        f
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn retrieval(&self) {
        // perfect alignment: caption embeddings equal their image's embedding
        let images = random_matrix(12, 8, 1);
        let image_of: Vec<usize> = (0..24).map(|c| c / 2).collect();
        let texts = images.select_rows(&image_of).unwrap();
        write_matrix(&self.path("ret_images.rseb"), &images);
        write_matrix(&self.path("ret_texts.rseb"), &texts);
        write_labels(&self.path("ret_texts.ids.jsonl"), &image_of);
        // training pairs, one caption per image
        write_matrix(&self.path("train_images.rseb"), &random_matrix(32, 24, 11));
        write_matrix(&self.path("train_texts.rseb"), &random_matrix(32, 20, 12));
    }

    fn zeroshot(&self) {
        for (name, seed) in [("UCM", 3u64), ("AID", 4)] {
            let d = self.path(name);
            fs::create_dir_all(&d).unwrap();
            let classes = random_matrix(5, 6, seed);
            let labels: Vec<usize> = (0..20).map(|i| (i * 7 + seed as usize) % 5).collect();
            let mut rng = seeded(seed + 100);
            let images_data: Vec<f32> = labels
                .iter()
                .flat_map(|&l| {
                    classes
                        .row(l)
                        .iter()
                        .map(|v| v + rng.gen_range(-0.3f32..0.3))
                        .collect::<Vec<_>>()
                })
                .collect();
            write_matrix(
                &d.join("images.rseb"),
                &EmbeddingMatrix::new(20, 6, images_data).unwrap(),
            );
            write_labels(&d.join("images.ids.jsonl"), &labels);
            write_matrix(&d.join("classes.rseb"), &classes);
            let names = [
                "airport",
                "Bare_Land",
                "beach",
                "dense residential",
                "forest",
            ];
            fs::write(
                d.join("classes.json"),
                serde_json::to_string(&names).unwrap(),
            )
            .unwrap();
        }
    }

    fn semloc(&self) {
        // 128×128 scene, 32-px windows at stride 32: a 4×4 grid; the query
        // matches the window at column 1, row 2
        let rows: Vec<Vec<f32>> = (0..16)
            .map(|i| {
                let mut v = vec![0.0f32; 16];
                v[i] = 1.0;
                v
            })
            .collect();
        write_matrix(
            &self.path("windows.rseb"),
            &EmbeddingMatrix::from_rows(16, &rows).unwrap(),
        );
        let mut q = vec![0.1f32; 16];
        q[2 * 4 + 1] = 1.0;
        write_matrix(
            &self.path("query.rseb"),
            &EmbeddingMatrix::from_rows(16, &[q]).unwrap(),
        );
        fs::write(
            self.path("gt.json"),
            r#"{"scene": "airport_01", "rects": [[32, 64, 32, 32]]}"#,
        )
        .unwrap();
    }

    fn probe(&self) {
        let (x, labels) = blobs(120, 3, 1.5, 21);
        write_matrix(&self.path("probe.rseb"), &x);
        write_labels(&self.path("probe.ids.jsonl"), &labels);
    }

    fn manifests(&self) {
        use rsvl_core::dataset::{ManifestRecord, PromptId};
        use rsvl_core::CropRect;
        let make = |source: &str, prefix: &str, n: usize| -> Vec<ManifestRecord> {
            (0..n)
                .flat_map(|i| {
                    PromptId::ALL.map(|p| {
                        let caption = match p {
                            PromptId::Short => format!("an airport with {i} planes"),
                            PromptId::Detail => format!(
                                "the image shows a large airport with {i} planes and runways"
                            ),
                        };
                        ManifestRecord::new(
                            format!("{prefix}{i}"),
                            source,
                            CropRect::new(0, 0, 512, 512),
                            p,
                            caption,
                        )
                        .unwrap()
                    })
                })
                .collect()
        };
        jsonl::write(self.path("gen.jsonl"), &make("InstructBLIP", "g", 5)).unwrap();
        jsonl::write(self.path("rs5m.jsonl"), &make("RS5M", "r", 3)).unwrap();
        let images: Vec<Value> = (0..3)
            .map(|i| serde_json::json!({"image_id": format!("c{i}"), "source_dataset": "UCM", "width": 256 + i, "height": 256}))
            .collect();
        jsonl::write(self.path("images.jsonl"), &images).unwrap();
    }

    /// Arguments for one run of every subcommand except `caption`, which
    /// needs a live endpoint.
    pub fn offline_commands(&self) -> Vec<(&'static str, Vec<String>)> {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let d = |n: &str| self.path(n).to_str().unwrap().to_string();
        vec![
            (
                "train",
                s(&[
                    "train",
                    "--image-features",
                    &d("train_images.rseb"),
                    "--text-features",
                    &d("train_texts.rseb"),
                    "--out-dim",
                    "8",
                    "--devices",
                    "1",
                    "--batch-per-device",
                    "16",
                    "--epochs",
                    "3",
                    "--seed",
                    "5",
                    "--out-dir",
                    &d("heads"),
                ]),
            ),
            (
                "eval-retrieval",
                s(&[
                    "eval-retrieval",
                    "--images",
                    &d("ret_images.rseb"),
                    "--texts",
                    &d("ret_texts.rseb"),
                    "--text-ids",
                    &d("ret_texts.ids.jsonl"),
                ]),
            ),
            (
                "eval-zeroshot",
                s(&[
                    "eval-zeroshot",
                    "--dataset",
                    &d("UCM"),
                    "--dataset",
                    &d("AID"),
                ]),
            ),
            (
                "eval-semloc",
                s(&[
                    "eval-semloc",
                    "--windows",
                    &d("windows.rseb"),
                    "--query",
                    &d("query.rseb"),
                    "--gt",
                    &d("gt.json"),
                    "--scene-width",
                    "128",
                    "--scene-height",
                    "128",
                    "--window",
                    "32",
                    "--stride",
                    "32",
                    "--cell",
                    "16",
                    "--pgm",
                    &d("map.pgm"),
                ]),
            ),
            (
                "eval-probe",
                s(&[
                    "eval-probe",
                    "--features",
                    &d("probe.rseb"),
                    "--ids",
                    &d("probe.ids.jsonl"),
                    "--shots",
                    "8",
                    "--seed",
                    "3",
                ]),
            ),
            (
                "stats",
                s(&[
                    "stats",
                    "--manifest",
                    &d("gen.jsonl"),
                    "--manifest",
                    &d("rs5m.jsonl"),
                    "--top",
                    "5",
                ]),
            ),
            (
                "merge",
                s(&[
                    "merge",
                    "--input",
                    &d("gen.jsonl"),
                    "--input",
                    &d("rs5m.jsonl"),
                    "--out",
                    &d("merged.jsonl"),
                ]),
            ),
        ]
    }
}
