use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::repr::NUM_PARTS;

/// One attention head per body part.
pub const NUM_HEADS: usize = NUM_PARTS;
/// Learnable placeholder tokens always present in the condition stream.
pub const PLACEHOLDER_TOKENS: usize = 64;
/// Reserved dataset id whose read-in/read-out layers serve any source.
pub const ALL_DATASETS: &str = "all";

/// Source datasets with dedicated read-in/read-out layers by default.
pub const KNOWN_DATASETS: [&str; 16] = [
    "HumanML3D",
    "KIT-ML",
    "Motion-X",
    "BABEL",
    "UESTC",
    "HumanAct12",
    "NTU-RGBD-120",
    "AMASS",
    "3DPW",
    "Human3.6M",
    "TED-Gesture++",
    "TED-Expressive",
    "Speech2Gesture-3D",
    "BEAT",
    "AIST++",
    "MPI-INF-3DHP",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Test-sized model.
    Desk,
    Tiny,
    Small,
    Base,
    Large,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Desk, Preset::Tiny, Preset::Small, Preset::Base, Preset::Large];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::Tiny => "tiny",
            Preset::Small => "small",
            Preset::Base => "base",
            Preset::Large => "large",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Validation(format!("unknown preset `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub preset: Preset,
    pub latent_dim: usize,
    pub num_layers: usize,
    pub num_experts: usize,
    /// Global templates per head.
    pub num_templates: usize,
    /// Highest Taylor order of each template signal.
    pub taylor_order: usize,
    /// Spread of the template weighting kernel, seconds.
    pub sigma: f64,
    /// Default probability for training-time drop masks.
    pub mask_probability: f64,
    /// Number of diffusion steps the timestep embedding covers.
    pub diffusion_steps: usize,
    /// Datasets with their own read-in/read-out layers, besides `"all"`.
    pub datasets: Vec<String>,
}

impl ModelConfig {
    pub fn preset(preset: Preset) -> Self {
        let (latent_dim, num_layers, num_experts, num_templates, mask_probability) = match preset {
            Preset::Desk => (8, 2, 4, 4, 0.1),
            Preset::Tiny => (64, 4, 16, 16, 0.1),
            Preset::Small => (64, 8, 16, 16, 0.2),
            Preset::Base => (128, 12, 16, 16, 0.3),
            Preset::Large => (128, 20, 32, 32, 0.4),
        };
        Self {
            preset,
            latent_dim,
            num_layers,
            num_experts,
            num_templates,
            taylor_order: 2,
            sigma: 1.0,
            mask_probability,
            diffusion_steps: 1000,
            datasets: KNOWN_DATASETS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn heads(&self) -> usize {
        NUM_HEADS
    }

    /// Width of condition tokens: one latent block per head.
    pub fn condition_width(&self) -> usize {
        NUM_HEADS * self.latent_dim
    }

    /// Registered dataset ids including `"all"`, in parameter order.
    pub fn registry(&self) -> Vec<String> {
        let mut ids = vec![ALL_DATASETS.to_string()];
        ids.extend(self.datasets.iter().filter(|d| *d != ALL_DATASETS).cloned());
        ids
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("latent_dim", self.latent_dim),
            ("num_layers", self.num_layers),
            ("num_experts", self.num_experts),
            ("num_templates", self.num_templates),
            ("diffusion_steps", self.diffusion_steps),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Validation(format!("{name} must be positive")));
            }
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Validation("sigma must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.mask_probability) {
            return Err(Error::Validation("mask_probability outside [0, 1]".into()));
        }
        Ok(())
    }
}
