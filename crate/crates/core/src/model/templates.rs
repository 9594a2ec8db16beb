//! Kinetic global templates and the temporal attention built on them.
//!
//! Each template carries a center time `c`, and Taylor coefficients
//! `G^(0..k)`. At query time `x` it contributes the polynomial
//! `Σ_n G^(n)/n! · (x − c)^n`, weighted by a softmax over templates of
//! `−(x − c)² / σ²`. Everything depends on `x − c` only, so moving all
//! centers by `Δ` moves the whole signal by `Δ`.

use ndarray::{s, Array1, Array2, Array3};

use crate::error::{Error, Result};
use crate::nn::{impl_params, softmax_in_place, Linear};
use crate::rng::SeededRng;

#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    /// Seconds.
    pub center: f64,
    /// `(k + 1) × D`, row `n` is `G^(n)`.
    pub coefficients: Array2<f64>,
}

impl Template {
    pub fn order(&self) -> usize {
        self.coefficients.nrows() - 1
    }

    pub fn latent_dim(&self) -> usize {
        self.coefficients.ncols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalTemplateSet {
    pub sigma: f64,
    /// `templates[head][j]`.
    pub templates: Vec<Vec<Template>>,
}

impl GlobalTemplateSet {
    pub fn new(sigma: f64, templates: Vec<Vec<Template>>) -> Result<Self> {
        let set = Self { sigma, templates };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Validation(format!("template spread {} must be positive", self.sigma)));
        }
        let d = self.latent_dim();
        for head in &self.templates {
            if head.is_empty() {
                return Err(Error::Validation("every head needs at least one template".into()));
            }
            for t in head {
                if !t.center.is_finite() {
                    return Err(Error::Validation("template center is not finite".into()));
                }
                if t.coefficients.nrows() == 0 || t.latent_dim() != d {
                    return Err(Error::dim("template coefficients", d, t.latent_dim()));
                }
            }
        }
        Ok(())
    }

    pub fn heads(&self) -> usize {
        self.templates.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.templates
            .first()
            .and_then(|h| h.first())
            .map_or(0, Template::latent_dim)
    }

    pub fn centers(&self, head: usize) -> Vec<f64> {
        self.templates[head].iter().map(|t| t.center).collect()
    }

    /// Joins two sets head by head, e.g. a clip and a shifted continuation.
    pub fn concat(&self, other: &GlobalTemplateSet) -> Result<GlobalTemplateSet> {
        if self.sigma != other.sigma {
            return Err(Error::Validation("template sets use different spreads".into()));
        }
        if self.heads() != other.heads() {
            return Err(Error::dim("template set heads", self.heads(), other.heads()));
        }
        let templates = self
            .templates
            .iter()
            .zip(&other.templates)
            .map(|(a, b)| a.iter().chain(b).cloned().collect())
            .collect();
        GlobalTemplateSet::new(self.sigma, templates)
    }
}

/// Moves every center by `delta` seconds.
pub fn shift_templates(set: &GlobalTemplateSet, delta: f64) -> GlobalTemplateSet {
    let mut out = set.clone();
    for t in out.templates.iter_mut().flatten() {
        t.center += delta;
    }
    out
}

fn logit(u: f64, sigma: f64) -> f64 {
    -(u * u) / (sigma * sigma)
}

/// Softmax over templates of `−(x − c_j)² / σ²`.
pub fn temporal_weights(x: f64, centers: &[f64], sigma: f64) -> Vec<f64> {
    let mut w: Vec<f64> = centers.iter().map(|c| logit(x - c, sigma)).collect();
    softmax_in_place(&mut w);
    w
}

/// `d/dx` of [`temporal_weights`].
pub fn weight_grad(x: f64, centers: &[f64], sigma: f64) -> Vec<f64> {
    let w = temporal_weights(x, centers, sigma);
    let slopes: Vec<f64> = centers.iter().map(|c| -2.0 * (x - c) / (sigma * sigma)).collect();
    let mean: f64 = w.iter().zip(&slopes).map(|(a, b)| a * b).sum();
    w.iter().zip(&slopes).map(|(wj, sj)| wj * (sj - mean)).collect()
}

/// The template's Taylor polynomial at `x`, per latent channel.
pub fn taylor_eval(template: &Template, x: f64) -> Array1<f64> {
    let u = x - template.center;
    let k = template.order();
    let factorials = factorials(k);
    let mut acc = &template.coefficients.row(k) / factorials[k];
    for n in (0..k).rev() {
        acc = acc * u + &template.coefficients.row(n) / factorials[n];
    }
    acc
}

fn factorials(k: usize) -> Vec<f64> {
    let mut f = vec![1.0; k + 1];
    for n in 1..=k {
        f[n] = f[n - 1] * n as f64;
    }
    f
}

/// Weighted sum of template signals for every query time and head,
/// `F × H × D`, before the output projection.
pub fn temporal_mix(set: &GlobalTemplateSet, times: &[f64]) -> Array3<f64> {
    let d = set.latent_dim();
    let mut out = Array3::zeros((times.len(), set.heads(), d));
    for (h, head) in set.templates.iter().enumerate() {
        let n_g = head.len();
        let order = head.iter().map(Template::order).max().unwrap_or(0);
        let fact = factorials(order);
        let mut offsets = Array2::zeros((times.len(), n_g));
        for (k, &x) in times.iter().enumerate() {
            for (j, t) in head.iter().enumerate() {
                offsets[(k, j)] = x - t.center;
            }
        }
        let mut weights = offsets.mapv(|u| logit(u, set.sigma));
        for mut row in weights.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("contiguous"));
        }
        let mut power = Array2::<f64>::ones(offsets.raw_dim());
        let mut acc = Array2::<f64>::zeros((times.len(), d));
        for n in 0..=order {
            let mut coeff = Array2::zeros((n_g, d));
            for (j, t) in head.iter().enumerate() {
                if n <= t.order() {
                    coeff.row_mut(j).assign(&(&t.coefficients.row(n) / fact[n]));
                }
            }
            acc += &(&weights * &power).dot(&coeff);
            power *= &offsets;
        }
        out.slice_mut(s![.., h, ..]).assign(&acc);
    }
    out
}

/// Template mixing followed by a per-head linear projection.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalAttention {
    pub out: Vec<Linear>,
}

impl_params!(TemporalAttention { out });

impl TemporalAttention {
    pub fn init(rng: &mut SeededRng, heads: usize, latent_dim: usize) -> Self {
        Self {
            out: (0..heads).map(|_| Linear::init(rng, latent_dim, latent_dim)).collect(),
        }
    }

    pub fn forward(&self, set: &GlobalTemplateSet, times: &[f64]) -> Result<Array3<f64>> {
        if set.heads() != self.out.len() {
            return Err(Error::dim("temporal attention heads", self.out.len(), set.heads()));
        }
        let mut mixed = temporal_mix(set, times);
        for (h, proj) in self.out.iter().enumerate() {
            let y = proj.forward(&mixed.slice(s![.., h, ..]));
            mixed.slice_mut(s![.., h, ..]).assign(&y);
        }
        Ok(mixed)
    }
}
