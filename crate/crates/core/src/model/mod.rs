//! Residual and transformer building blocks and the full U-shaped network.

mod blocks;
mod checkpoint;
mod config;
mod net;
mod params;

pub use blocks::{
    residual_block, transformer_decoder_block, transformer_encoder_block, BatchNormWeights, DecoderWeights,
    EncoderWeights, FfnWeights, LayerNormWeights, ResidualWeights,
};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use config::UTNetConfig;
pub use net::Model;
pub use params::{BufferStore, Census, Init, ParamKind, ParamStore};
