//! Body-part-aware diffusion denoiser.
//!
//! Motion rows are read into an `F × 10 × D` latent grid (one token per
//! frame and body part), passed through stacked layers that combine
//! per-frame attention across parts with template-based temporal attention,
//! and read back out to 669-wide rows.

mod builder;
mod config;
mod denoiser;
mod moe;
mod readio;
mod snapshot;
mod spatial;
mod stylize;
mod templates;

pub use builder::{StreamWeights, TemplateBuilder};
pub use config::{ModelConfig, Preset, ALL_DATASETS, KNOWN_DATASETS, NUM_HEADS, PLACEHOLDER_TOKENS};
pub use denoiser::{denoiser_forward, ArtLayer, Denoiser, LayerContext};
pub use moe::MixtureOfExperts;
pub use readio::{LatentMotion, ReadIo};
pub use snapshot::{Snapshot, Tensor};
pub use spatial::SpatialAttention;
pub use stylize::{apply_modulation, Stylization};
pub use templates::{
    shift_templates, taylor_eval, temporal_mix, temporal_weights, weight_grad, GlobalTemplateSet, Template,
    TemporalAttention,
};
