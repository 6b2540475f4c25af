use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use clap::Args;
use rsvl_core::dataset::{caption_stats, merge_manifests, ManifestSummary, PromptId, Stoplist};
use serde::Serialize;

use super::common::{table, write_file, Finished, Inputs};
use crate::caption::{build_manifest, CaptionClient, ClientConfig, ImageRef};
use crate::error::Error;
use crate::manifest::{write_failures, write_manifest};

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct StatsArgs {
    /// Manifest (JSONL); repeat to pool several
    #[arg(long = "manifest", value_name = "FILE", required = true)]
    #[serde(skip)]
    pub manifests: Vec<PathBuf>,

    /// Stoplist, one token per line with # comments [default: bundled
    /// function-word list]
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub stoplist: Option<PathBuf>,

    /// Width of the caption length bins, in words
    #[arg(long, default_value_t = 10)]
    pub bin_width: usize,

    /// Tokens listed in the report and table
    #[arg(long, default_value_t = 20)]
    pub top: usize,

    /// Also write the full frequency table as token,count CSV
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub frequencies_csv: Option<PathBuf>,

    #[arg(long, value_name = "FILE", default_value = "stats-report.json")]
    #[serde(skip)]
    pub report: PathBuf,
}

#[derive(Debug, Serialize)]
struct TokenCount {
    token: String,
    count: u64,
}

#[derive(Debug, Serialize)]
struct StatsOutput {
    total_pairs: u64,
    per_source: BTreeMap<String, u64>,
    bin_width: usize,
    histogram: Vec<u64>,
    /// Lower word count of every local-maximum bin.
    modes: Vec<usize>,
    vocabulary_size: usize,
    stoplist_size: usize,
    top_tokens: Vec<TokenCount>,
}

pub(super) fn stats(
    command: &str,
    args: StatsArgs,
    mut inputs: Inputs,
    out: &mut dyn Write,
) -> Result<(), Error> {
    if args.bin_width == 0 {
        return Err(Error::Argument {
            flag: "bin-width",
            reason: "must be at least 1".into(),
        });
    }
    let mut records = Vec::new();
    for path in &args.manifests {
        records.extend(inputs.manifest("manifest", path)?);
    }
    let stoplist = match &args.stoplist {
        Some(path) => Stoplist::parse(&inputs.text("stoplist", path)?),
        None => Stoplist::bundled(),
    };
    let captions: Vec<&str> = records.iter().map(|r| r.caption.as_str()).collect();
    let stats = caption_stats(&captions, &stoplist, args.bin_width)?;
    if let Some(path) = &args.frequencies_csv {
        let mut csv = String::from("token,count\n");
        for (token, count) in stats.top_tokens(usize::MAX) {
            csv.push_str(&format!("{token},{count}\n"));
        }
        write_file(path, csv.as_bytes())?;
    }
    let top = stats.top_tokens(args.top);
    let rows: Vec<Vec<String>> = top
        .iter()
        .map(|(t, c)| vec![t.clone(), c.to_string()])
        .collect();
    let mut text = format!("pairs {}\n", stats.total_pairs);
    text.push_str(&table(&["token", "count"], &rows));
    Finished {
        command,
        report: StatsOutput {
            total_pairs: stats.total_pairs,
            per_source: ManifestSummary::of(&records).per_source,
            bin_width: args.bin_width,
            modes: stats
                .histogram
                .modes()
                .iter()
                .map(|b| b * args.bin_width)
                .collect(),
            histogram: stats.histogram.counts.clone(),
            vocabulary_size: stats.frequencies.len(),
            stoplist_size: stoplist.len(),
            top_tokens: top
                .into_iter()
                .map(|(token, count)| TokenCount { token, count })
                .collect(),
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
pub struct CaptionArgs {
    /// Images to caption, JSONL of {"image_id", "source_dataset", "width",
    /// "height", "image_b64"?}
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub images: PathBuf,

    /// Base URL of the captioning service
    #[arg(long, value_name = "URL")]
    pub endpoint: String,

    /// Requests in flight at once
    #[arg(long, default_value_t = 8)]
    pub concurrency: usize,

    /// Retries after a 5xx or connection failure
    #[arg(long, default_value_t = 3)]
    pub max_retries: u32,

    /// Delay before the first retry, doubled for each further one
    #[arg(long, value_name = "MS", default_value_t = 200)]
    pub backoff_ms: u64,

    #[arg(long, value_name = "SECONDS", default_value_t = 60)]
    pub timeout_secs: u64,

    /// Manifest to write (JSONL)
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub out: PathBuf,

    /// Failure sidecar [default: <out>.failures.jsonl]
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub failures: Option<PathBuf>,

    #[arg(long, value_name = "FILE", default_value = "caption-report.json")]
    #[serde(skip)]
    pub report: PathBuf,
}

#[derive(Debug, Serialize)]
struct CaptionOutput {
    n_images: usize,
    n_records: usize,
    n_failures: usize,
    per_source: BTreeMap<String, u64>,
    prompts: BTreeMap<PromptId, &'static str>,
}

pub(super) fn caption(
    command: &str,
    args: CaptionArgs,
    mut inputs: Inputs,
    out: &mut dyn Write,
) -> Result<(), Error> {
    if args.concurrency == 0 {
        return Err(Error::Argument {
            flag: "concurrency",
            reason: "must be at least 1".into(),
        });
    }
    let images: Vec<ImageRef> = inputs.jsonl("images", &args.images)?;
    let failures_path = args.failures.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".failures.jsonl");
        PathBuf::from(p)
    });
    let client = CaptionClient::new(ClientConfig {
        endpoint: args.endpoint.clone(),
        max_retries: args.max_retries,
        backoff: Duration::from_millis(args.backoff_ms),
        timeout: Duration::from_secs(args.timeout_secs),
        concurrency: args.concurrency,
    });
    let outcome = build_manifest(&images, &client);
    write_manifest(&args.out, &outcome.records)?;
    write_failures(&failures_path, &outcome.failures)?;
    if !images.is_empty() && outcome.records.is_empty() {
        let first = &outcome.failures[0];
        return Err(crate::caption::CaptionError::EndpointDown {
            attempts: args.max_retries + 1,
            last: format!(
                "no image captioned; first failure ({}): {}",
                first.image_id, first.error
            ),
        }
        .into());
    }
    let rows = vec![
        vec!["images".into(), images.len().to_string()],
        vec!["records".into(), outcome.records.len().to_string()],
        vec!["failures".into(), outcome.failures.len().to_string()],
    ];
    Finished {
        command,
        report: CaptionOutput {
            n_images: images.len(),
            n_records: outcome.records.len(),
            n_failures: outcome.failures.len(),
            per_source: ManifestSummary::of(&outcome.records).per_source,
            prompts: PromptId::ALL.iter().map(|&p| (p, p.text())).collect(),
        },
        parameters: &args,
        seed: None,
        inputs,
        report_path: &args.report,
        table: table(&["caption", "count"], &rows),
    }
    .emit(out)
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct MergeArgs {
    /// Manifest to merge (JSONL); repeat in merge order
    #[arg(long = "input", value_name = "FILE", required = true)]
    #[serde(skip)]
    pub inputs: Vec<PathBuf>,

    /// Merged manifest to write (JSONL)
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub out: PathBuf,

    #[arg(long, value_name = "FILE", default_value = "merge-report.json")]
    #[serde(skip)]
    pub report: PathBuf,
}

#[derive(Debug, Serialize)]
struct MergePart {
    path: String,
    total: u64,
    per_source: BTreeMap<String, u64>,
}

#[derive(Debug, Serialize)]
struct MergeOutput {
    parts: Vec<MergePart>,
    per_source: BTreeMap<String, u64>,
    total: u64,
}

pub(super) fn merge(
    command: &str,
    args: MergeArgs,
    mut inputs: Inputs,
    out: &mut dyn Write,
) -> Result<(), Error> {
    let mut parts = Vec::with_capacity(args.inputs.len());
    let mut part_info = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let records = inputs.manifest("manifest", path)?;
        let summary = ManifestSummary::of(&records);
        part_info.push(MergePart {
            path: path.display().to_string(),
            total: summary.total,
            per_source: summary.per_source,
        });
        parts.push(records);
    }
    let merged = merge_manifests(parts)?;
    write_manifest(&args.out, &merged.records)?;
    let mut rows: Vec<Vec<String>> = merged
        .summary
        .per_source
        .iter()
        .map(|(s, c)| vec![s.clone(), c.to_string()])
        .collect();
    rows.push(vec!["total".into(), merged.summary.total.to_string()]);
    Finished {
        command,
        report: MergeOutput {
            parts: part_info,
            per_source: merged.summary.per_source.clone(),
            total: merged.summary.total,
        },
        parameters: &args,
        seed: None,
        inputs,
        report_path: &args.report,
        table: table(&["source", "pairs"], &rows),
    }
    .emit(out)
}
