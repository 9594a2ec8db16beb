use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Array3, Axis};

use super::config::{ModelConfig, NUM_HEADS};
use crate::error::{Error, Result};
use crate::nn::{impl_params, silu, sinusoidal, uniform_matrix, Linear};
use crate::rng::SeededRng;

/// Per-layer affine modulation `θ ⊙ e_w + e_b` driven by the diffusion
/// step, the frame rate and the dataset id.
#[derive(Clone, Debug, PartialEq)]
pub struct Stylization {
    latent_dim: usize,
    steps: usize,
    embed_dim: usize,
    pub time_map: Linear,
    pub fps_map: Linear,
    /// One row per registered dataset id.
    pub dataset_table: BTreeMap<String, Array1<f64>>,
    pub to_scale: Linear,
    pub to_shift: Linear,
}

impl_params!(Stylization { time_map, fps_map, dataset_table, to_scale, to_shift });

impl Stylization {
    pub fn init(rng: &mut SeededRng, config: &ModelConfig) -> Self {
        let d = config.latent_dim;
        let e = 4 * d;
        let hd = NUM_HEADS * d;
        let time_map = Linear::init(rng, e, e);
        let fps_map = Linear::init(rng, e, e);
        let dataset_table = config
            .registry()
            .into_iter()
            .map(|id| {
                let row = uniform_matrix(rng, 1, e, 1.0).row(0).to_owned();
                (id, row)
            })
            .collect();
        Self {
            latent_dim: d,
            steps: config.diffusion_steps,
            embed_dim: e,
            time_map,
            fps_map,
            dataset_table,
            to_scale: Linear::init(rng, e, hd),
            to_shift: Linear::init(rng, e, hd),
        }
    }

    /// Returns `(e_w, e_b)`, each `H × D`.
    pub fn modulation(&self, t_step: usize, fps: f64, dataset: &str) -> Result<(Array2<f64>, Array2<f64>)> {
        if t_step >= self.steps {
            return Err(Error::Validation(format!("timestep {t_step} outside [0, {})", self.steps)));
        }
        let id = self
            .dataset_table
            .get(dataset)
            .ok_or_else(|| Error::UnknownDataset(dataset.to_string()))?;
        let t = self.time_map.forward_vec(&sinusoidal(t_step as f64, self.embed_dim).view());
        let f = self.fps_map.forward_vec(&sinusoidal(fps, self.embed_dim).view());
        let e = (t + f + id).mapv(silu);
        let shape = (NUM_HEADS, self.latent_dim);
        let w = self.to_scale.forward_vec(&e.view()).into_shape_with_order(shape).expect("H·D");
        let b = self.to_shift.forward_vec(&e.view()).into_shape_with_order(shape).expect("H·D");
        Ok((w, b))
    }

    pub fn stylize(&self, latent: &Array3<f64>, t_step: usize, fps: f64, dataset: &str) -> Result<Array3<f64>> {
        let (w, b) = self.modulation(t_step, fps, dataset)?;
        apply_modulation(latent, &w, &b)
    }
}

/// Applies `θ ⊙ e_w + e_b` to every frame's `H × D` slab.
pub fn apply_modulation(latent: &Array3<f64>, scale: &Array2<f64>, shift: &Array2<f64>) -> Result<Array3<f64>> {
    let (_, h, d) = latent.dim();
    if scale.dim() != (h, d) || shift.dim() != (h, d) {
        return Err(Error::dim("modulation shape", h * d, scale.len()));
    }
    let mut out = latent.clone();
    for mut slab in out.axis_iter_mut(Axis(0)) {
        slab *= scale;
        slab += shift;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::Preset;
    use crate::rng::seeded;

    fn setup() -> (Stylization, Array3<f64>) {
        let c = ModelConfig::preset(Preset::Desk);
        let s = Stylization::init(&mut seeded(4), &c);
        let mut r = seeded(5);
        let latent = uniform_matrix(&mut r, 6, NUM_HEADS * 8, 1.0)
            .into_shape_with_order((6, NUM_HEADS, 8))
            .unwrap();
        (s, latent)
    }

    #[test]
    fn neutral_modulation_is_identity() {
        let (_, latent) = setup();
        let out = apply_modulation(&latent, &Array2::ones((10, 8)), &Array2::zeros((10, 8))).unwrap();
        assert_eq!(out, latent);
    }

    #[test]
    fn shape_preserved() {
        let (s, latent) = setup();
        assert_eq!(s.stylize(&latent, 3, 30.0, "all").unwrap().dim(), latent.dim());
    }

    #[test]
    fn first_and_last_step_differ() {
        let (s, latent) = setup();
        let a = s.stylize(&latent, 0, 30.0, "all").unwrap();
        let b = s.stylize(&latent, 999, 30.0, "all").unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn fps_and_dataset_matter() {
        let (s, latent) = setup();
        let a = s.stylize(&latent, 10, 30.0, "AMASS").unwrap();
        assert_ne!(a, s.stylize(&latent, 10, 20.0, "AMASS").unwrap());
        assert_ne!(a, s.stylize(&latent, 10, 30.0, "BEAT").unwrap());
    }

    #[test]
    fn invalid_inputs() {
        let (s, latent) = setup();
        assert!(s.stylize(&latent, 1000, 30.0, "all").is_err());
        assert!(matches!(s.stylize(&latent, 0, 30.0, "x"), Err(Error::UnknownDataset(_))));
    }
}
