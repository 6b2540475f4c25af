//! Dataset-side plumbing: crop planning, manifest records and merging,
//! caption statistics.

mod crop;
mod manifest;
mod stats;

pub use crop::{resize_center_crop_plan, ResizePlan, CAPTION_INPUT_SIZE};
pub use manifest::{merge_manifests, ManifestRecord, ManifestSummary, MergedManifest, PromptId};
pub use stats::{
    caption_length_histogram, caption_stats, token_frequency, word_count, CaptionStats,
    LengthHistogram, Stoplist, DEFAULT_STOPLIST,
};
