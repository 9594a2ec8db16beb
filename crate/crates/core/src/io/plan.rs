use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ALL_DATASETS;
use crate::rng;

pub const DEFAULT_ALL_REPLACEMENT: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetWeight {
    pub dataset: String,
    /// Task family, e.g. `text_to_motion`.
    pub category: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchPlanConfig {
    pub datasets: Vec<DatasetWeight>,
    #[serde(default = "default_replacement")]
    pub all_replacement: f64,
}

fn default_replacement() -> f64 {
    DEFAULT_ALL_REPLACEMENT
}

fn entry(dataset: &str, category: &str, weight: f64) -> DatasetWeight {
    DatasetWeight {
        dataset: dataset.into(),
        category: category.into(),
        weight,
    }
}

impl Default for BatchPlanConfig {
    /// Pre-training mixture: text-to-motion 40%, unconditional 25%,
    /// action 10%, speech 10%, music 5%, imitation 10%.
    fn default() -> Self {
        let third = 1.0 / 3.0;
        Self {
            datasets: vec![
                entry("HumanML3D", "text_to_motion", 0.15),
                entry("Motion-X", "text_to_motion", 0.15),
                entry("KIT-ML", "text_to_motion", 0.05),
                entry("BABEL", "text_to_motion", 0.05),
                entry("AMASS", "unconditional", 0.25),
                entry("HumanAct12", "action_to_motion", 0.10 * third),
                entry("UESTC", "action_to_motion", 0.10 * third),
                entry("NTU-RGBD-120", "action_to_motion", 0.10 * third),
                entry("BEAT", "speech_to_gesture", 0.05),
                entry("TED-Gesture++", "speech_to_gesture", 0.05 * third),
                entry("TED-Expressive", "speech_to_gesture", 0.05 * third),
                entry("Speech2Gesture-3D", "speech_to_gesture", 0.05 * third),
                entry("AIST++", "music_to_dance", 0.05),
                entry("MPI-INF-3DHP", "motion_imitation", 0.05),
                entry("Human3.6M", "motion_imitation", 0.05),
            ],
            all_replacement: DEFAULT_ALL_REPLACEMENT,
        }
    }
}

impl BatchPlanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Validation("batch plan has no datasets".into()));
        }
        if self.datasets.iter().any(|d| !(d.weight.is_finite() && d.weight >= 0.0)) {
            return Err(Error::Validation("dataset weights must be finite and nonnegative".into()));
        }
        if self.datasets.iter().map(|d| d.weight).sum::<f64>() <= 0.0 {
            return Err(Error::Validation("dataset weights sum to zero".into()));
        }
        if !(0.0..=1.0).contains(&self.all_replacement) {
            return Err(Error::Validation("all_replacement outside [0, 1]".into()));
        }
        Ok(())
    }

    /// Normalized weight per category.
    pub fn category_shares(&self) -> BTreeMap<String, f64> {
        let total: f64 = self.datasets.iter().map(|d| d.weight).sum();
        let mut out = BTreeMap::new();
        for d in &self.datasets {
            *out.entry(d.category.clone()).or_insert(0.0) += d.weight / total;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedSample {
    pub dataset: String,
    pub category: String,
    /// Id used for read-in/read-out: `dataset` or `"all"`.
    pub effective: String,
}

/// Draws `n` training samples: the dataset in proportion to its weight,
/// then an independent coin flip replacing its id with `"all"`.
pub fn batch_plan(config: &BatchPlanConfig, n: usize, seed: u64) -> Result<Vec<PlannedSample>> {
    config.validate()?;
    if n == 0 {
        return Err(Error::Validation("batch plan needs n >= 1".into()));
    }
    let index = WeightedIndex::new(config.datasets.iter().map(|d| d.weight))
        .map_err(|e| Error::Validation(e.to_string()))?;
    let mut rng = rng::seeded(seed);
    Ok((0..n)
        .map(|_| {
            let d = &config.datasets[index.sample(&mut rng)];
            let replaced = rng.random::<f64>() < config.all_replacement;
            PlannedSample {
                dataset: d.dataset.clone(),
                category: d.category.clone(),
                effective: if replaced { ALL_DATASETS.into() } else { d.dataset.clone() },
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_category_shares() {
        let shares = BatchPlanConfig::default().category_shares();
        let expect = [
            ("text_to_motion", 0.40),
            ("unconditional", 0.25),
            ("action_to_motion", 0.10),
            ("speech_to_gesture", 0.10),
            ("music_to_dance", 0.05),
            ("motion_imitation", 0.10),
        ];
        assert_eq!(shares.len(), expect.len());
        for (c, w) in expect {
            assert!((shares[c] - w).abs() < 1e-12, "{c}");
        }
    }

    #[test]
    fn single_dataset() {
        let cfg = BatchPlanConfig {
            datasets: vec![entry("BEAT", "speech_to_gesture", 3.0)],
            all_replacement: 0.0,
        };
        let plan = batch_plan(&cfg, 100, 1).unwrap();
        assert!(plan.iter().all(|p| p.dataset == "BEAT" && p.effective == "BEAT"));
    }

    #[test]
    fn frequencies_converge() {
        let n = 100_000;
        let plan = batch_plan(&BatchPlanConfig::default(), n, 7).unwrap();
        let h = plan.iter().filter(|p| p.dataset == "HumanML3D").count() as f64 / n as f64;
        let all = plan.iter().filter(|p| p.effective == "all").count() as f64 / n as f64;
        assert!((0.14..=0.16).contains(&h), "{h}");
        assert!((0.09..=0.11).contains(&all), "{all}");
    }

    #[test]
    fn deterministic_and_validated() {
        let cfg = BatchPlanConfig::default();
        assert_eq!(batch_plan(&cfg, 50, 3).unwrap(), batch_plan(&cfg, 50, 3).unwrap());
        assert!(batch_plan(&cfg, 0, 3).is_err());
        let empty = BatchPlanConfig {
            datasets: vec![],
            all_replacement: 0.1,
        };
        assert!(batch_plan(&empty, 5, 3).is_err());
        let negative = BatchPlanConfig {
            datasets: vec![entry("A", "x", -1.0)],
            all_replacement: 0.1,
        };
        assert!(negative.validate().is_err());
    }
}
