//! Multi-head self-attention over feature maps.
//!
//! Four variants share one fused kernel ([`attention_core`]):
//!
//! | variant | keys/values | logits |
//! |---|---|---|
//! | [`standard_mhsa`] | full resolution (`m = n`) | `Q K^T / sqrt(d)` |
//! | [`efficient_mhsa`] | projected to `h x w` (`m = k`) | `Q K̄^T / sqrt(d)` |
//! | [`efficient_mhsa_relpos`] | projected | `(Q K̄^T + S_H + S_W) / sqrt(d)` |
//! | [`decoder_cross_mhsa`] | projected, from the coarse decoder stream | as above |
//!
//! The efficient variants never materialize an `n x n` matrix: the only
//! quadratic-looking buffer is the `n x k` similarity matrix per head.

mod config;
mod kernel;
mod mhsa;
mod relpos;

pub use config::{AttentionConfig, Projection};
pub use kernel::{attention_core, buffer_stats, reset_buffer_stats, similarity_bytes, BufferStats, LogitBias};
pub use mhsa::{
    decoder_cross_mhsa, efficient_mhsa, efficient_mhsa_relpos, merge_heads, project_kv, split_heads, standard_mhsa,
    AttentionWeights,
};
pub use relpos::{
    expand_axis_scores, query_to_key_coord, relative_axis_scores, relative_logits, relative_logits_axis, RelAxis,
    RelativePositionTable,
};
