//! Frame-rate resampling and the mask forms used for completion tasks and
//! pre-training.
//!
//! Two conventions coexist and are tagged on every mask: visibility masks
//! (1 = frame given as context) describe completion tasks, drop masks
//! (1 = input replaced by an empty token) describe missing or artificially
//! hidden body parts.

mod mask;
mod resample;

pub use mask::{
    loss_weights, random_train_mask, task_mask, visibility_to_drop, BodyPartMask, Boundary,
    MaskConvention, MaskStrategy, Task, TaskSpec,
};
pub use resample::resample;
