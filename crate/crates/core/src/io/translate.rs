use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::repr::{unified_to_keypoints, KeypointFrame, MotionSequence};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TranslationTarget {
    Unified,
    /// World positions of all 52 joints.
    Keypoints52,
}

impl TranslationTarget {
    pub fn name(self) -> &'static str {
        match self {
            TranslationTarget::Unified => "unified",
            TranslationTarget::Keypoints52 => "keypoints52",
        }
    }
}

impl fmt::Display for TranslationTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TranslationTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unified" => Ok(TranslationTarget::Unified),
            "keypoints52" => Ok(TranslationTarget::Keypoints52),
            _ => Err(Error::UnsupportedTarget(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Translated {
    Unified(MotionSequence),
    Keypoints(Vec<KeypointFrame>),
}

/// Converts unified motion into another representation. Learned
/// translators plug in here.
pub trait Translator {
    fn target(&self) -> &str;

    fn translate(&self, seq: &MotionSequence) -> Result<Translated>;
}

/// Deterministic translator for the built-in targets.
#[derive(Clone, Copy, Debug)]
pub struct Builtin(pub TranslationTarget);

impl Translator for Builtin {
    fn target(&self) -> &str {
        self.0.name()
    }

    fn translate(&self, seq: &MotionSequence) -> Result<Translated> {
        Ok(translate(seq, self.0))
    }
}

pub fn translate(seq: &MotionSequence, target: TranslationTarget) -> Translated {
    match target {
        TranslationTarget::Unified => Translated::Unified(seq.clone()),
        TranslationTarget::Keypoints52 => Translated::Keypoints(unified_to_keypoints(seq)),
    }
}
