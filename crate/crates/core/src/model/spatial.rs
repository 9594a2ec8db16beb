use ndarray::{s, Array2, Array3};

use crate::error::{Error, Result};
use crate::nn::{impl_params, softmax_in_place, Linear};
use crate::repr::NUM_PARTS;
use crate::rng::SeededRng;

/// Per-frame scaled dot-product attention across the ten body-part tokens.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
}

impl_params!(SpatialAttention { query, key, value });

impl SpatialAttention {
    pub fn init(rng: &mut SeededRng, latent_dim: usize) -> Self {
        Self {
            query: Linear::init(rng, latent_dim, latent_dim),
            key: Linear::init(rng, latent_dim, latent_dim),
            value: Linear::init(rng, latent_dim, latent_dim),
        }
    }

    /// `available[k][p]` marks which parts may serve as keys in frame `k`.
    /// Every part gets an output.
    pub fn forward(&self, latent: &Array3<f64>, available: &[[bool; NUM_PARTS]]) -> Result<Array3<f64>> {
        let (frames, parts, d) = latent.dim();
        if parts != NUM_PARTS {
            return Err(Error::dim("spatial attention parts", NUM_PARTS, parts));
        }
        if available.len() != frames {
            return Err(Error::dim("spatial availability frames", frames, available.len()));
        }
        let scale = 1.0 / (d as f64).sqrt();
        let mut out = Array3::zeros(latent.dim());
        for (k, avail) in available.iter().enumerate() {
            if !avail.iter().any(|&a| a) {
                return Err(Error::Contract(format!("frame {k} has no available body part")));
            }
            let tokens = latent.slice(s![k, .., ..]);
            let q = self.query.forward(&tokens);
            let kk = self.key.forward(&tokens);
            let v = self.value.forward(&tokens);
            let mut scores: Array2<f64> = q.dot(&kk.t()) * scale;
            for mut row in scores.rows_mut() {
                for (p, x) in row.iter_mut().enumerate() {
                    if !avail[p] {
                        *x = f64::NEG_INFINITY;
                    }
                }
                softmax_in_place(row.as_slice_mut().expect("contiguous"));
            }
            out.slice_mut(s![k, .., ..]).assign(&scores.dot(&v));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::uniform_matrix;
    use crate::rng::seeded;
    use ndarray::{arr1, arr2, Array1};

    fn random_latent(frames: usize, d: usize, seed: u64) -> Array3<f64> {
        uniform_matrix(&mut seeded(seed), frames, NUM_PARTS * d, 1.0)
            .into_shape_with_order((frames, NUM_PARTS, d))
            .unwrap()
    }

    #[test]
    fn single_available_part_broadcasts_its_value() {
        let att = SpatialAttention::init(&mut seeded(1), 4);
        let latent = random_latent(3, 4, 2);
        let mut avail = [[false; NUM_PARTS]; 3];
        avail[0][4] = true;
        avail[1][0] = true;
        avail[2][9] = true;
        let out = att.forward(&latent, &avail).unwrap();
        for (k, p) in [(0, 4), (1, 0), (2, 9)] {
            let v = att.value.forward_vec(&latent.slice(s![k, p, ..]));
            for i in 0..NUM_PARTS {
                let diff = &out.slice(s![k, i, ..]) - &v;
                assert!(diff.iter().all(|d| d.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn identical_tokens_give_identical_outputs() {
        let att = SpatialAttention::init(&mut seeded(1), 4);
        let row = arr1(&[0.3, -0.2, 0.9, 0.1]);
        let mut latent = Array3::zeros((1, NUM_PARTS, 4));
        for p in 0..NUM_PARTS {
            latent.slice_mut(s![0, p, ..]).assign(&row);
        }
        let out = att.forward(&latent, &[[true; NUM_PARTS]]).unwrap();
        for p in 1..NUM_PARTS {
            assert_eq!(out.slice(s![0, p, ..]), out.slice(s![0, 0, ..]));
        }
    }

    #[test]
    fn hand_computed_two_part_attention() {
        // Identity Q/K, V doubles. Tokens a=(1,0), b=(0,1) visible.
        let eye = arr2(&[[1.0, 0.0], [0.0, 1.0]]);
        let att = SpatialAttention {
            query: Linear::from_parts(eye.clone(), Array1::zeros(2)),
            key: Linear::from_parts(eye.clone(), Array1::zeros(2)),
            value: Linear::from_parts(eye * 2.0, Array1::zeros(2)),
        };
        let mut latent = Array3::zeros((1, NUM_PARTS, 2));
        latent[(0, 0, 0)] = 1.0;
        latent[(0, 1, 1)] = 1.0;
        latent[(0, 5, 0)] = 7.0;
        let mut avail = [[false; NUM_PARTS]];
        avail[0][0] = true;
        avail[0][1] = true;
        let out = att.forward(&latent, &avail).unwrap();
        let s = 1.0 / 2f64.sqrt();
        // Query a: scores (s, 0).
        let wa = s.exp() / (s.exp() + 1.0);
        assert!((out[(0, 0, 0)] - 2.0 * wa).abs() < 1e-9);
        assert!((out[(0, 0, 1)] - 2.0 * (1.0 - wa)).abs() < 1e-9);
        // Query from the masked part (7,0): scores (7s, 0).
        let w5 = (7.0 * s).exp() / ((7.0 * s).exp() + 1.0);
        assert!((out[(0, 5, 0)] - 2.0 * w5).abs() < 1e-9);
        assert!((out[(0, 5, 1)] - 2.0 * (1.0 - w5)).abs() < 1e-9);
    }

    #[test]
    fn fully_masked_frame_is_rejected() {
        let att = SpatialAttention::init(&mut seeded(1), 4);
        let latent = random_latent(2, 4, 3);
        let avail = [[true; NUM_PARTS], [false; NUM_PARTS]];
        assert!(matches!(att.forward(&latent, &avail), Err(Error::Contract(_))));
    }
}
