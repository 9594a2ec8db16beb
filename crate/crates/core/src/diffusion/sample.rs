use ndarray::Array2;

use super::{ddpm_step, guided_x0, q_sample, NoiseSchedule};
use crate::condition::ConditionSet;
use crate::error::{Error, Result};
use crate::model::Denoiser;
use crate::repr::{canonical_layout, Part, FRAME_DIM};
use crate::rng::{self, SeededRng};
use crate::temporal::{BodyPartMask, MaskConvention};

/// Anything that predicts clean motion from a noisy `F × 669` matrix.
/// `t_step` is zero-based.
pub trait Denoise {
    fn predict_x0(&self, x_t: &Array2<f64>, t_step: usize, conditions: &ConditionSet) -> Result<Array2<f64>>;
}

/// Binds a [`Denoiser`] to a frame rate, dataset id and drop mask.
pub struct ModelDenoiser<'a> {
    pub model: &'a Denoiser,
    pub fps: f64,
    pub dataset: &'a str,
    pub drop: BodyPartMask,
}

impl Denoise for ModelDenoiser<'_> {
    fn predict_x0(&self, x_t: &Array2<f64>, t_step: usize, conditions: &ConditionSet) -> Result<Array2<f64>> {
        self.model.forward(x_t, self.fps, self.dataset, t_step, &self.drop, conditions)
    }
}

pub struct SampleRequest<'a> {
    pub frames: usize,
    /// Cells equal to `known` in the output.
    pub visibility: &'a BodyPartMask,
    /// `F × 669`; required when any cell is visible.
    pub known: Option<&'a Array2<f64>>,
    pub conditions: &'a ConditionSet,
    pub guidance: f64,
    pub seed: u64,
}

fn gaussian(rng: &mut SeededRng, frames: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((frames, FRAME_DIM), || rng::standard_normal(rng))
}

/// Feature indices of every visible cell.
fn visible_cells(mask: &BodyPartMask) -> Vec<(usize, usize)> {
    let layout = canonical_layout();
    let mut cells = Vec::new();
    for (k, row) in mask.rows().iter().enumerate() {
        for part in Part::ALL {
            if row[part.index()] {
                cells.extend(layout.indices(part).map(|i| (k, i)));
            }
        }
    }
    cells
}

fn overwrite(x: &mut Array2<f64>, source: &Array2<f64>, cells: &[(usize, usize)]) {
    for &c in cells {
        x[c] = source[c];
    }
}

/// Reverse diffusion from pure noise with known-region replacement.
///
/// Before the model sees step `t`, visible cells hold `known` noised to
/// level `t`; after the final step they hold `known` exactly.
pub fn sample(denoiser: &impl Denoise, schedule: &NoiseSchedule, req: &SampleRequest<'_>) -> Result<Array2<f64>> {
    if req.frames == 0 {
        return Err(Error::Length("cannot sample zero frames".into()));
    }
    req.visibility.require(MaskConvention::Visibility)?;
    req.visibility.require_frames(req.frames)?;
    let cells = visible_cells(req.visibility);
    let known = match req.known {
        Some(k) => {
            if k.dim() != (req.frames, FRAME_DIM) {
                return Err(Error::dim("known motion", req.frames * FRAME_DIM, k.len()));
            }
            if cells.iter().any(|&c| !k[c].is_finite()) {
                return Err(Error::Contract("known motion is missing values under visible cells".into()));
            }
            Some(k)
        }
        None if !cells.is_empty() => {
            return Err(Error::Contract("visible cells require known motion".into()));
        }
        None => None,
    };

    let mut rng = rng::seeded(req.seed);
    let empty = ConditionSet::empty(req.conditions.width());
    let guided = req.guidance != 1.0 && !req.conditions.is_empty();
    let steps = schedule.steps();

    let mut x = gaussian(&mut rng, req.frames);
    if let Some(k) = known {
        let noised = q_sample(k, steps, &gaussian(&mut rng, req.frames), schedule)?;
        overwrite(&mut x, &noised, &cells);
    }
    for t in (1..=steps).rev() {
        let cond = denoiser.predict_x0(&x, t - 1, req.conditions)?;
        let x0 = if guided {
            let uncond = denoiser.predict_x0(&x, t - 1, &empty)?;
            guided_x0(&cond, &uncond, req.guidance)?
        } else {
            cond
        };
        x = ddpm_step(&x, &x0, t, schedule, &mut rng)?;
        if let Some(k) = known {
            if t > 1 {
                let noised = q_sample(k, t - 1, &gaussian(&mut rng, req.frames), schedule)?;
                overwrite(&mut x, &noised, &cells);
            } else {
                overwrite(&mut x, k, &cells);
            }
        }
    }
    Ok(x)
}
