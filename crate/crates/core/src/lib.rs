//! Unified human-motion toolkit.
//!
//! * [`repr`]: the 669-dimensional per-frame pose vector, its ten body parts,
//!   6D rotations, forward kinematics and keypoint conversion.
//! * [`temporal`]: frame-rate resampling and every mask form used for
//!   completion tasks and pre-training.
//! * [`condition`]: multi-modal condition tokens, the refiner and condition
//!   dropout.
//! * [`model`]: the ArtAttention denoiser forward pass.
//! * [`diffusion`]: DDPM schedule, noising, reverse sampling and the masked
//!   x0 loss.
//! * [`io`]: motion files, synthetic motion, batch planning and translators.

pub mod condition;
pub mod diffusion;
pub mod error;
pub mod io;
pub mod model;
pub mod nn;
pub mod repr;
pub mod rng;
pub mod temporal;

pub use error::{Error, Result};
