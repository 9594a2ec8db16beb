//! Multi-modal condition signals.
//!
//! Raw inputs are turned into token matrices by an [`Embedder`] (a
//! deterministic hashing stub stands in for a real frozen encoder), refined by
//! two transformer encoder layers and stored per modality in a
//! [`ConditionSet`]. Token width is always `10 × latent_dim` so each body-part
//! head owns one contiguous block.

mod embed;
mod refine;

pub use embed::{Embedder, EmbedderStub};
pub use refine::{EncoderLayer, Refiner};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Default condition dropout used for classifier-free guidance training.
pub const DEFAULT_CONDITION_DROPOUT: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Text,
    Speech,
    Music,
    Video,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::Text, Modality::Speech, Modality::Music, Modality::Video];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Speech => "speech",
            Modality::Music => "music",
            Modality::Video => "video",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Modality::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown modality `{s}`")))
    }
}

/// Token matrices (`L × width`) for whichever modalities are present.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionSet {
    width: usize,
    tokens: BTreeMap<Modality, Array2<f64>>,
}

impl ConditionSet {
    pub fn empty(width: usize) -> Self {
        Self {
            width,
            tokens: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, modality: Modality, tokens: Array2<f64>) -> Result<()> {
        if tokens.nrows() == 0 {
            return Err(Error::Validation(format!("{modality}: condition needs at least one token")));
        }
        if tokens.ncols() != self.width {
            return Err(Error::dim("condition token width", self.width, tokens.ncols()));
        }
        self.tokens.insert(modality, tokens);
        Ok(())
    }

    pub fn with(mut self, modality: Modality, tokens: Array2<f64>) -> Result<Self> {
        self.insert(modality, tokens)?;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, modality: Modality) -> Option<&Array2<f64>> {
        self.tokens.get(&modality)
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn modalities(&self) -> impl Iterator<Item = Modality> + '_ {
        self.tokens.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Modality, &Array2<f64>)> {
        self.tokens.iter().map(|(m, t)| (*m, t))
    }

    /// Total token count over all modalities.
    pub fn total_tokens(&self) -> usize {
        self.tokens.values().map(|t| t.nrows()).sum()
    }

    /// All tokens stacked in modality order.
    pub fn concatenated(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.total_tokens(), self.width));
        let mut row = 0;
        for t in self.tokens.values() {
            out.slice_mut(ndarray::s![row..row + t.nrows(), ..]).assign(t);
            row += t.nrows();
        }
        out
    }

    /// Applies `f` to every token matrix, keeping the modality keys.
    pub fn map_tokens(&self, mut f: impl FnMut(&Array2<f64>) -> Result<Array2<f64>>) -> Result<Self> {
        let mut out = Self::empty(self.width);
        for (m, t) in &self.tokens {
            out.insert(*m, f(t)?)?;
        }
        Ok(out)
    }
}

/// Removes each present modality independently with probability `p`.
///
/// One uniform draw is made per modality in fixed order whether or not it is
/// present, so the decision for a modality depends only on the seed.
pub fn dropout_conditions(set: &ConditionSet, p: f64, seed: u64) -> Result<ConditionSet> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Validation(format!("dropout probability {p} outside [0, 1]")));
    }
    let mut rng = rng::seeded(seed);
    let mut out = set.clone();
    for m in Modality::ALL {
        let drop = rng.random::<f64>() < p;
        if drop {
            out.tokens.remove(&m);
        }
    }
    Ok(out)
}
