//! Motion files, synthetic clips, training-batch planning and
//! representation translators.

mod motion_file;
mod plan;
mod synth;
mod translate;

pub use motion_file::{
    format_keypoints, format_motions, load, load_keypoints, parse_keypoints, parse_motions, save, save_keypoints,
    KeypointClip,
};
pub use plan::{batch_plan, BatchPlanConfig, DatasetWeight, PlannedSample, DEFAULT_ALL_REPLACEMENT};
pub use synth::{synth_motion, SynthPattern, CONSTANT_STEP};
pub use translate::{translate, Builtin, TranslationTarget, Translated, Translator};
