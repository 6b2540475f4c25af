//! File formats, command-line front end and captioning client for
//! [`rsvl_core`].
//!
//! * [`rseb`]: binary embedding matrices, with [`ids`] row sidecars.
//! * [`manifest`] and [`jsonl`]: line-delimited JSON records.
//! * [`caption`]: HTTP captioning client and two-prompt manifest builder;
//!   [`mock`] serves the same contract in-process.
//! * [`report`]: the JSON envelope every subcommand writes.
//! * [`cli`]: the `rsvl` binary.

pub mod caption;
pub mod cli;
pub mod error;
pub mod ids;
pub mod jsonl;
pub mod manifest;
pub mod mock;
pub mod report;
pub mod rseb;

pub use error::{Error, Result};
