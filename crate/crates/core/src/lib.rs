//! Core numerics for contrastive vision-language training and evaluation.
//!
//! Everything here is pure computation over in-memory buffers: the crate is
//! `no_std` and only needs `alloc`. File formats, HTTP and the command line
//! live in the `rsvl` companion crate.
//!
//! Conventions shared by every module:
//! - embeddings are row-major `f32` matrices, images as rows;
//! - dot products accumulate in `f64` and are stored back as `f32`;
//! - every random draw comes from a seeded [`rng::SeededRng`] so results are
//!   reproducible across platforms.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod error;
pub mod geometry;
pub mod matrix;
pub mod probe;
pub mod retrieval;
pub mod rng;
pub mod semloc;
pub mod train;
pub mod zeroshot;

pub use error::{Error, Result};
pub use geometry::CropRect;
pub use matrix::{EmbeddingMatrix, SimilarityMatrix};
