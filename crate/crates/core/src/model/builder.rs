use ndarray::{s, Array2, ArrayView2, Axis};

use super::config::{ModelConfig, NUM_HEADS, PLACEHOLDER_TOKENS};
use super::moe::MixtureOfExperts;
use super::templates::{GlobalTemplateSet, Template};
use crate::condition::ConditionSet;
use crate::error::{Error, Result};
use crate::nn::{impl_params, sigmoid, softmax_axis, uniform_matrix, Linear};
use crate::rng::SeededRng;

/// Builds one template set per layer from the motion tokens and the
/// condition tokens.
///
/// For each head, both streams produce `N_g` key channels and `D`-wide
/// values. Keys are softmax-normalized over the tokens of their own stream;
/// template `j`'s raw feature is the sum of both streams' values weighted by
/// key channel `j`. The condition stream always starts with the learnable
/// placeholder tokens, so it is never empty.
#[derive(Clone, Debug, PartialEq)]
pub struct TemplateBuilder {
    latent_dim: usize,
    templates: usize,
    order: usize,
    sigma: f64,
    pub motion_key: Linear,
    pub motion_value: Linear,
    /// `64 × H·D`.
    pub placeholders: Array2<f64>,
    /// Maps a `D`-wide condition block to `N_g` keys followed by `D` values.
    pub condition_moe: MixtureOfExperts,
    pub center: Linear,
    pub coefficients: Linear,
}

impl_params!(TemplateBuilder {
    motion_key,
    motion_value,
    placeholders,
    condition_moe,
    center,
    coefficients,
});

/// Per-head normalized key weights of the two streams.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamWeights {
    /// `F × N_g`, columns sum to 1.
    pub motion: Array2<f64>,
    /// `(64 + L) × N_g`, columns sum to 1.
    pub condition: Array2<f64>,
}

impl TemplateBuilder {
    pub fn init(rng: &mut SeededRng, config: &ModelConfig) -> Self {
        let d = config.latent_dim;
        let n_g = config.num_templates;
        let k = config.taylor_order;
        Self {
            latent_dim: d,
            templates: n_g,
            order: k,
            sigma: config.sigma,
            motion_key: Linear::init(rng, d, n_g),
            motion_value: Linear::init(rng, d, d),
            placeholders: uniform_matrix(rng, PLACEHOLDER_TOKENS, NUM_HEADS * d, 1.0 / (d as f64).sqrt()),
            condition_moe: MixtureOfExperts::init(rng, d, n_g + d, config.num_experts),
            center: Linear::init(rng, d, 1),
            coefficients: Linear::init(rng, d, (k + 1) * d),
        }
    }

    /// Placeholders stacked on top of every condition token, `(64 + L) × H·D`.
    pub fn condition_tokens(&self, conditions: &ConditionSet) -> Result<Array2<f64>> {
        let width = NUM_HEADS * self.latent_dim;
        if !conditions.is_empty() && conditions.width() != width {
            return Err(Error::dim("condition width", width, conditions.width()));
        }
        if conditions.is_empty() {
            return Ok(self.placeholders.clone());
        }
        let tokens = conditions.concatenated();
        ndarray::concatenate(Axis(0), &[self.placeholders.view(), tokens.view()])
            .map_err(|e| Error::Contract(e.to_string()))
    }

    fn condition_stream(&self, tokens: &Array2<f64>, head: usize) -> (Array2<f64>, Array2<f64>) {
        let d = self.latent_dim;
        let block = tokens.slice(s![.., head * d..(head + 1) * d]);
        let kv = self.condition_moe.forward(&block);
        let keys = softmax_axis(&kv.slice(s![.., ..self.templates]), Axis(0));
        (keys, kv.slice(s![.., self.templates..]).to_owned())
    }

    fn motion_stream(&self, motion: &ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        let keys = softmax_axis(&self.motion_key.forward(motion).view(), Axis(0));
        (keys, self.motion_value.forward(motion))
    }

    /// `motion` is one head's `F × D` slice.
    pub fn stream_weights(&self, motion: &ArrayView2<f64>, conditions: &ConditionSet, head: usize) -> Result<StreamWeights> {
        let tokens = self.condition_tokens(conditions)?;
        Ok(StreamWeights {
            motion: self.motion_stream(motion).0,
            condition: self.condition_stream(&tokens, head).0,
        })
    }

    /// `latent` is `F × H × D`; `duration` bounds the template centers.
    pub fn build(&self, latent: &ndarray::Array3<f64>, duration: f64, conditions: &ConditionSet) -> Result<GlobalTemplateSet> {
        let (frames, heads, d) = latent.dim();
        if d != self.latent_dim {
            return Err(Error::dim("template builder latent width", self.latent_dim, d));
        }
        if frames == 0 {
            return Err(Error::Length("cannot build templates from zero frames".into()));
        }
        let tokens = self.condition_tokens(conditions)?;
        let mut set = Vec::with_capacity(heads);
        for h in 0..heads {
            let (ax, vx) = self.motion_stream(&latent.slice(s![.., h, ..]));
            let (ac, vc) = self.condition_stream(&tokens, h);
            let raw = ax.t().dot(&vx) + ac.t().dot(&vc);
            let centers = self.center.forward(&raw.view());
            let coeffs = self.coefficients.forward(&raw.view());
            let head = (0..self.templates)
                .map(|j| Template {
                    center: duration * sigmoid(centers[(j, 0)]),
                    coefficients: coeffs
                        .row(j)
                        .to_owned()
                        .into_shape_with_order((self.order + 1, d))
                        .expect("(k+1)·D"),
                })
                .collect();
            set.push(head);
        }
        GlobalTemplateSet::new(self.sigma, set)
    }
}
