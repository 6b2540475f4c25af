use std::io;
use std::path::PathBuf;

use crate::caption::CaptionError;
use crate::jsonl::JsonlError;
use crate::rseb::RsebError;

/// Process exit status for success.
pub const EXIT_OK: i32 = 0;
/// Bad arguments or unusable input files; nothing was computed.
pub const EXIT_VALIDATION: i32 = 1;
/// Failure after inputs were accepted.
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Rseb { path: PathBuf, source: RsebError },
    #[error("{}: {source}", path.display())]
    Jsonl { path: PathBuf, source: JsonlError },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{}: {source}", path.display())]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: io::Error },
    #[error("{}: {reason}", path.display())]
    Invalid { path: PathBuf, reason: String },
    #[error("--{flag}: {reason}")]
    Argument { flag: &'static str, reason: String },
    #[error(transparent)]
    Core(#[from] rsvl_core::Error),
    #[error(transparent)]
    Caption(#[from] CaptionError),
    #[error("writing {}: {source}", path.display())]
    Output { path: PathBuf, source: io::Error },
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(
                rsvl_core::Error::DidNotConverge { .. } | rsvl_core::Error::NaNScore { .. },
            )
            | Error::Caption(_)
            | Error::Output { .. } => EXIT_RUNTIME,
            _ => EXIT_VALIDATION,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
