// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error type shared by every module of the engine.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, RudderError>;

#[derive(Debug, Error)]
#[non_exhaustive]
pub enum RudderError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),

    #[error("vector norm {norm:e} is below epsilon {epsilon:e}")]
    ZeroNormInput { norm: f64, epsilon: f64 },

    #[error("cannot pool an empty set of vectors")]
    EmptyPool,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("vector must be non-empty")]
    EmptyVector,

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("token sequence must be non-empty")]
    EmptySequence,

    #[error("sequence of {len} tokens exceeds max_seq_len {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("KV cache overflow: {needed} positions needed, capacity is {max}")]
    CacheOverflow { needed: usize, max: usize },

    #[error("token id {id} is outside the vocabulary of size {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },

    #[error("layer {layer} is out of range for a {n_layers}-layer model")]
    LayerOutOfRange { layer: usize, n_layers: usize },

    #[error("prefill requires an empty KV cache, found {filled} cached positions")]
    CacheNotEmpty { filled: usize },

    #[error("pooled residual update has norm {norm:e}; no direction to extract")]
    DegenerateDirection { norm: f64 },

    #[error("steering direction must have unit norm, got {norm}")]
    NonUnitDirection { norm: f64 },

    #[error("prompt of {prompt} tokens plus {new_tokens} new tokens exceeds max_seq_len {max}")]
    SpanExceedsContext {
        prompt: usize,
        new_tokens: usize,
        max: usize,
    },

    #[error("prompt must contain at least 2 tokens (context plus the first decode input), got {0}")]
    PromptTooShort(usize),

    #[error("copy model needs {needed} {what}, only {available} available")]
    CapacityExceeded {
        what: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("benchmark needs at least {min} tokens per run, got {got}")]
    InsufficientTokens { min: usize, got: usize },

    #[error("benchmark needs at least {min} repeats, got {got}")]
    InsufficientRepeats { min: usize, got: usize },

    #[error("benchmark output diverged from the untimed reference run for mode {mode}")]
    BenchOutputMismatch { mode: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
