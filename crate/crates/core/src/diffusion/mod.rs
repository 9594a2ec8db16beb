//! Denoising diffusion: a linear noise schedule, closed-form forward
//! noising, the posterior step of the reverse chain, guidance blending and
//! the masked reconstruction loss.

mod sample;

pub use sample::{sample, Denoise, ModelDenoiser, SampleRequest};

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::repr::{canonical_layout, Part, FRAME_DIM, NUM_PARTS};
use crate::rng::{self, SeededRng};

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 2e-2;

/// Per-step tables, 1-based in the public accessors.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// `β` linear from `beta_start` to `beta_end` over `steps`.
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Validation("schedule needs at least one step".into()));
        }
        if !(0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::Validation(format!(
                "need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
            )));
        }
        let betas: Vec<f64> = (0..steps)
            .map(|i| {
                if steps == 1 {
                    beta_start
                } else {
                    beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(steps);
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
        })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    /// `ᾱ_t`, with `ᾱ_0 = 1`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::Validation(format!("step {t} outside [1, {}]", self.steps())));
        }
        Ok(())
    }

    /// `β̃_t = β_t (1 − ᾱ_{t−1}) / (1 − ᾱ_t)`.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        self.beta(t) * (1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t))
    }

    /// Coefficients of `x̂_0` and `x_t` in the posterior mean.
    pub fn posterior_coefficients(&self, t: usize) -> (f64, f64) {
        let ab = self.alpha_bar(t);
        let ab_prev = self.alpha_bar(t - 1);
        let c0 = ab_prev.sqrt() * self.beta(t) / (1.0 - ab);
        let ct = self.alpha(t).sqrt() * (1.0 - ab_prev) / (1.0 - ab);
        (c0, ct)
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::linear(DEFAULT_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END).expect("default schedule is valid")
    }
}

fn same_shape(a: &Array2<f64>, b: &Array2<f64>, context: &'static str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::dim(context, a.len(), b.len()));
    }
    Ok(())
}

/// `x_t = √ᾱ_t x_0 + √(1 − ᾱ_t) ε`. `t = 0` returns `x_0`.
pub fn q_sample(x0: &Array2<f64>, t: usize, noise: &Array2<f64>, schedule: &NoiseSchedule) -> Result<Array2<f64>> {
    same_shape(x0, noise, "q_sample noise")?;
    if t > schedule.steps() {
        return Err(Error::Validation(format!("step {t} outside [0, {}]", schedule.steps())));
    }
    if t == 0 {
        return Ok(x0.clone());
    }
    let ab = schedule.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(Zip::from(x0).and(noise).map_collect(|&x, &e| a * x + b * e))
}

pub fn posterior_mean(x_t: &Array2<f64>, x0_pred: &Array2<f64>, t: usize, schedule: &NoiseSchedule) -> Result<Array2<f64>> {
    same_shape(x_t, x0_pred, "posterior mean")?;
    schedule.check_step(t)?;
    let (c0, ct) = schedule.posterior_coefficients(t);
    Ok(Zip::from(x0_pred).and(x_t).map_collect(|&x0, &xt| c0 * x0 + ct * xt))
}

/// One reverse step `x_t → x_{t−1}`. At `t = 1` the result is `x0_pred`.
pub fn ddpm_step(
    x_t: &Array2<f64>,
    x0_pred: &Array2<f64>,
    t: usize,
    schedule: &NoiseSchedule,
    rng: &mut SeededRng,
) -> Result<Array2<f64>> {
    same_shape(x_t, x0_pred, "ddpm step")?;
    schedule.check_step(t)?;
    if t == 1 {
        return Ok(x0_pred.clone());
    }
    let mut mean = posterior_mean(x_t, x0_pred, t, schedule)?;
    let sd = schedule.posterior_variance(t).sqrt();
    mean.mapv_inplace(|m| m + sd * rng::standard_normal(rng));
    Ok(mean)
}

/// `u + s (c − u)`.
pub fn guided_x0(cond: &Array2<f64>, uncond: &Array2<f64>, scale: f64) -> Result<Array2<f64>> {
    same_shape(cond, uncond, "guidance")?;
    Ok(Zip::from(cond).and(uncond).map_collect(|&c, &u| u + scale * (c - u)))
}

/// Mean squared error over cells with nonzero weight. `weights` is
/// `F × 10`, broadcast to every feature of the part.
pub fn training_loss(x0_pred: &Array2<f64>, x0: &Array2<f64>, weights: &Array2<f64>) -> Result<f64> {
    same_shape(x0_pred, x0, "training loss")?;
    if x0.ncols() != FRAME_DIM {
        return Err(Error::dim("training loss width", FRAME_DIM, x0.ncols()));
    }
    if weights.dim() != (x0.nrows(), NUM_PARTS) {
        return Err(Error::dim("loss weights", x0.nrows() * NUM_PARTS, weights.len()));
    }
    let layout = canonical_layout();
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..x0.nrows() {
        for part in Part::ALL {
            let w = weights[(k, part.index())];
            if w == 0.0 {
                continue;
            }
            for i in layout.indices(part) {
                let d = x0_pred[(k, i)] - x0[(k, i)];
                num += w * d * d;
                den += w;
            }
        }
    }
    if den == 0.0 {
        return Err(Error::Contract("every loss weight is zero".into()));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::uniform_matrix;
    use crate::rng::seeded;

    #[test]
    fn tiny_schedules() {
        let s = NoiseSchedule::linear(1, 0.1, 0.1).unwrap();
        assert!((s.alpha_bar(1) - 0.9).abs() < 1e-15);
        let s = NoiseSchedule::linear(2, 0.1, 0.2).unwrap();
        assert!((s.alpha_bar(2) - 0.72).abs() < 1e-15);
        let x = q_sample(&Array2::ones((1, 1)), 2, &Array2::ones((1, 1)), &s).unwrap();
        assert!((x[(0, 0)] - 1.3777).abs() < 1e-4);
    }

    #[test]
    fn default_schedule_decreases() {
        let s = NoiseSchedule::default();
        assert_eq!(s.steps(), 1000);
        assert!(s.alpha_bars().windows(2).all(|w| w[1] < w[0]));
        assert!((s.beta(1) - 1e-4).abs() < 1e-18 && (s.beta(1000) - 2e-2).abs() < 1e-15);
    }

    #[test]
    fn invalid_schedules() {
        assert!(NoiseSchedule::linear(0, 0.1, 0.2).is_err());
        assert!(NoiseSchedule::linear(5, 0.0, 0.2).is_err());
        assert!(NoiseSchedule::linear(5, 0.3, 0.2).is_err());
        assert!(NoiseSchedule::linear(5, 0.1, 1.0).is_err());
    }

    #[test]
    fn q_sample_edge_cases() {
        let s = NoiseSchedule::default();
        let x0 = uniform_matrix(&mut seeded(1), 3, 4, 1.0);
        let eps = uniform_matrix(&mut seeded(2), 3, 4, 1.0);
        let t = 300;
        let a = s.alpha_bar(t);
        assert_eq!(q_sample(&x0, t, &Array2::zeros((3, 4)), &s).unwrap(), x0.mapv(|v| a.sqrt() * v));
        assert_eq!(q_sample(&Array2::zeros((3, 4)), t, &eps, &s).unwrap(), eps.mapv(|v| (1.0 - a).sqrt() * v));
        assert!(matches!(q_sample(&x0, t, &Array2::zeros((4, 3)), &s), Err(Error::Dimension { .. })));
    }

    #[test]
    fn last_step_returns_prediction() {
        let s = NoiseSchedule::default();
        let xt = uniform_matrix(&mut seeded(1), 3, 4, 5.0);
        let x0 = uniform_matrix(&mut seeded(2), 3, 4, 5.0);
        assert_eq!(ddpm_step(&xt, &x0, 1, &s, &mut seeded(3)).unwrap(), x0);
    }

    #[test]
    fn fixed_point_when_alpha_bar_is_flat() {
        let s = NoiseSchedule {
            betas: vec![0.5, 0.0],
            alphas: vec![0.5, 1.0],
            alpha_bars: vec![0.5, 0.5],
        };
        let x = uniform_matrix(&mut seeded(1), 3, 4, 2.0);
        let m = posterior_mean(&x, &x, 2, &s).unwrap();
        assert!((&m - &x).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn posterior_mean_matches_noise_form() {
        let s = NoiseSchedule::default();
        let mut r = seeded(4);
        for t in [2, 17, 500, 1000] {
            let xt = uniform_matrix(&mut r, 2, 5, 2.0);
            let x0 = uniform_matrix(&mut r, 2, 5, 2.0);
            let got = posterior_mean(&xt, &x0, t, &s).unwrap();
            let ab = s.alpha_bar(t);
            let beta = s.beta(t);
            for ((g, &xt), &x0) in got.iter().zip(&xt).zip(&x0) {
                let eps = (xt - ab.sqrt() * x0) / (1.0 - ab).sqrt();
                let expect = (xt - beta / (1.0 - ab).sqrt() * eps) / (1.0 - beta).sqrt();
                assert!((g - expect).abs() < 1e-12, "{g} vs {expect}");
            }
        }
    }

    #[test]
    fn step_noise_has_posterior_variance() {
        let s = NoiseSchedule::default();
        let t = 400;
        let n = 20_000;
        let xt = Array2::zeros((n, 1));
        let x0 = Array2::zeros((n, 1));
        let out = ddpm_step(&xt, &x0, t, &s, &mut seeded(5)).unwrap();
        let var = out.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let expect = s.posterior_variance(t);
        assert!((var / expect - 1.0).abs() < 0.05);
    }

    #[test]
    fn guidance_blend() {
        let c = Array2::from_elem((2, 2), 1.0);
        let u = Array2::zeros((2, 2));
        assert_eq!(guided_x0(&c, &u, 1.0).unwrap(), c);
        assert_eq!(guided_x0(&c, &u, 0.0).unwrap(), u);
        assert_eq!(guided_x0(&c, &u, 2.0).unwrap(), Array2::from_elem((2, 2), 2.0));
        let c = uniform_matrix(&mut seeded(1), 3, 3, 1.0);
        let u = uniform_matrix(&mut seeded(2), 3, 3, 1.0);
        let (s1, s2) = (0.3, 4.1);
        let lhs = guided_x0(&c, &u, s1).unwrap() + guided_x0(&c, &u, s2).unwrap();
        let rhs = guided_x0(&c, &u, (s1 + s2) / 2.0).unwrap() * 2.0;
        assert!((&lhs - &rhs).iter().all(|v| v.abs() < 1e-12));
        assert!(guided_x0(&c, &Array2::zeros((2, 3)), 1.0).is_err());
    }

    #[test]
    fn loss_semantics() {
        let x = uniform_matrix(&mut seeded(1), 4, FRAME_DIM, 1.0);
        let ones = Array2::ones((4, NUM_PARTS));
        assert_eq!(training_loss(&x, &x, &ones).unwrap(), 0.0);
        assert!((training_loss(&(&x + 1.0), &x, &ones).unwrap() - 1.0).abs() < 1e-12);

        let layout = canonical_layout();
        let mut pred = x.clone();
        let mut w = ones.clone();
        for part in &Part::ALL[..5] {
            for k in 0..4 {
                w[(k, part.index())] = 0.0;
                for i in layout.indices(*part) {
                    pred[(k, i)] += 2.0;
                }
            }
        }
        assert_eq!(training_loss(&pred, &x, &w).unwrap(), 0.0);
        assert!(matches!(
            training_loss(&x, &x, &Array2::zeros((4, NUM_PARTS))),
            Err(Error::Contract(_))
        ));
    }
}
