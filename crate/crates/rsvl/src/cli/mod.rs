//! `rsvl` command-line interface.
//!
//! Every subcommand loads and validates all of its inputs before computing,
//! writes a JSON report (see [`crate::report`]) and prints a table. Exit
//! status is 0 on success, 1 for invalid arguments or inputs, 2 for
//! failures after the inputs were accepted.
//!
//! `--config FILE` reads a TOML file whose `[<subcommand>]` table supplies
//! flag values (`out_dim = 64` acts as `--out-dim 64`; arrays repeat the
//! flag). Flags given on the command line take precedence.

mod common;
mod config;
mod data;
mod eval;
mod train;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, EXIT_OK, EXIT_VALIDATION};

pub use data::{CaptionArgs, MergeArgs, StatsArgs};
pub use eval::{ProbeArgs, ProbeMethod, RetrievalArgs, SemLocArgs, ZeroShotArgs};
pub use train::TrainArgs;

#[derive(Debug, Parser)]
#[command(
    name = "rsvl",
    version,
    about = "Contrastive vision-language training and evaluation"
)]
pub struct Cli {
    /// TOML file with per-subcommand defaults, e.g. a `[train]` table
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit image and text projection heads with the symmetric InfoNCE loss
    Train(TrainArgs),
    /// Image-to-text and text-to-image recall at 1, 5 and 10
    EvalRetrieval(RetrievalArgs),
    /// Zero-shot top-1 accuracy from prompt embeddings
    EvalZeroshot(ZeroShotArgs),
    /// Semantic localization metrics for one query over a scene
    EvalSemloc(SemLocArgs),
    /// Linear-probe or k-NN accuracy on frozen features
    EvalProbe(ProbeArgs),
    /// Caption length histogram and token frequencies of manifests
    Stats(StatsArgs),
    /// Caption images with both prompts through the HTTP service
    Caption(CaptionArgs),
    /// Concatenate manifests, rejecting duplicate (image, prompt) keys
    Merge(MergeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::EvalRetrieval(_) => "eval-retrieval",
            Command::EvalZeroshot(_) => "eval-zeroshot",
            Command::EvalSemloc(_) => "eval-semloc",
            Command::EvalProbe(_) => "eval-probe",
            Command::Stats(_) => "stats",
            Command::Caption(_) => "caption",
            Command::Merge(_) => "merge",
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit status. Tables go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args: Vec<String> = match args.into_iter().map(OsString::into_string).collect() {
        Ok(a) => a,
        Err(bad) => {
            let _ = writeln!(err, "error: argument is not valid UTF-8: {bad:?}");
            return EXIT_VALIDATION;
        }
    };
    let (args, config_file) = match config::apply(args) {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    match execute(cli.command, config_file, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(
    command: Command,
    config_file: Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<(), Error> {
    let name = command.name();
    let mut inputs = common::Inputs::new();
    if let Some(path) = &config_file {
        inputs.bytes("config", path)?;
    }
    match command {
        Command::Train(a) => train::run(name, a, inputs, out),
        Command::EvalRetrieval(a) => eval::retrieval(name, a, inputs, out),
        Command::EvalZeroshot(a) => eval::zeroshot(name, a, inputs, out),
        Command::EvalSemloc(a) => eval::semloc(name, a, inputs, out),
        Command::EvalProbe(a) => eval::probe(name, a, inputs, out),
        Command::Stats(a) => data::stats(name, a, inputs, out),
        Command::Caption(a) => data::caption(name, a, inputs, out),
        Command::Merge(a) => data::merge(name, a, inputs, out),
    }
}
