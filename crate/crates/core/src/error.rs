use alloc::string::String;

/// Errors raised by the core numerics.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("row {index} has (near-)zero norm and cannot be normalized")]
    ZeroRow { index: usize },

    #[error("embedding dimensions differ: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what} must be L2-normalized")]
    NotNormalized { what: &'static str },

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("step {step} out of range for a schedule of {total} steps")]
    StepOutOfRange { step: usize, total: usize },

    #[error("score at index {index} is NaN")]
    NaNScore { index: usize },

    #[error("k must be at least 1, got {k}")]
    KOutOfRange { k: usize },

    #[error("k = {k} exceeds the {rows} available training rows")]
    KTooLarge { k: usize, rows: usize },

    #[error(
        "template must contain exactly one \"{{class name}}\" placeholder, found {placeholders}"
    )]
    BadTemplate { placeholders: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{what} is empty")]
    Empty { what: &'static str },

    #[error("window {window} does not fit in a {scene_w}x{scene_h} scene")]
    WindowTooLarge {
        window: u32,
        scene_w: u32,
        scene_h: u32,
    },

    #[error("no windows to build a localization map from")]
    NoWindows,

    #[error("semantic localization weights must be nonnegative and sum to 1 (sum = {sum})")]
    WeightSumInvalid { sum: f64 },

    #[error("class {class} has {count} member(s); at least 2 are needed to split")]
    ClassTooSmall { class: usize, count: usize },

    #[error("class {class} has {available} training rows, {requested} shots requested")]
    InsufficientShots {
        class: usize,
        available: usize,
        requested: usize,
    },

    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },

    #[error("optimizer stopped before convergence (gradient inf-norm {grad_inf_norm:e})")]
    DidNotConverge { grad_inf_norm: f64 },

    #[error("duplicate manifest key ({image_id}, {prompt_id})")]
    DuplicateKey { image_id: String, prompt_id: String },

    #[error("invalid value for {field}: {reason}")]
    InvalidArgument {
        field: &'static str,
        reason: &'static str,
    },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
