//! Dataset-dependent read-in and read-out layers between the 669-wide
//! motion rows and the `F × H × D` latent grid.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Array3};

use super::config::{ModelConfig, NUM_HEADS};
use crate::error::{Error, Result};
use crate::nn::{impl_params, uniform_matrix, Linear};
use crate::repr::{canonical_layout, Part, PartLayout, FRAME_DIM};
use crate::rng::SeededRng;
use crate::temporal::{BodyPartMask, MaskConvention};

/// Latent motion: one `D`-vector per frame and body part, plus the real time
/// of each frame.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentMotion {
    pub grid: Array3<f64>,
    pub times: Vec<f64>,
}

impl LatentMotion {
    pub fn new(grid: Array3<f64>, times: Vec<f64>) -> Result<Self> {
        if grid.dim().0 != times.len() {
            return Err(Error::dim("latent times", grid.dim().0, times.len()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("latent times must be strictly increasing".into()));
        }
        Ok(Self { grid, times })
    }

    /// Frame times `k / fps`.
    pub fn frame_times(frames: usize, fps: f64) -> Vec<f64> {
        (0..frames).map(|k| k as f64 / fps).collect()
    }

    pub fn frames(&self) -> usize {
        self.grid.dim().0
    }

    pub fn latent_dim(&self) -> usize {
        self.grid.dim().2
    }

    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReadIo {
    latent_dim: usize,
    /// Per dataset, one `part_size → D` map per body part.
    pub read_in: BTreeMap<String, Vec<Linear>>,
    /// Per dataset, one `D → part_size` map per body part, zero bias.
    pub read_out: BTreeMap<String, Vec<Linear>>,
    /// Learnable empty token per body part, `H × D`.
    pub empty_tokens: Array2<f64>,
    layout: PartLayout,
}

impl_params!(ReadIo { read_in, read_out, empty_tokens });

impl ReadIo {
    pub fn init(rng: &mut SeededRng, config: &ModelConfig) -> Self {
        let layout = canonical_layout();
        let d = config.latent_dim;
        let mut read_in = BTreeMap::new();
        let mut read_out = BTreeMap::new();
        for id in config.registry() {
            let ins = Part::ALL
                .iter()
                .map(|&p| Linear::init(rng, layout.size(p), d))
                .collect();
            let outs = Part::ALL
                .iter()
                .map(|&p| Linear::init_zero_bias(rng, d, layout.size(p)))
                .collect();
            read_in.insert(id.clone(), ins);
            read_out.insert(id, outs);
        }
        let empty_tokens = uniform_matrix(rng, NUM_HEADS, d, 1.0 / (d as f64).sqrt());
        Self {
            latent_dim: d,
            read_in,
            read_out,
            empty_tokens,
            layout,
        }
    }

    pub fn has_dataset(&self, id: &str) -> bool {
        self.read_in.contains_key(id)
    }

    /// Maps motion rows into the latent grid. Cells set in `drop` take the
    /// part's empty token; their input values are never read.
    pub fn read_in(&self, motion: &Array2<f64>, fps: f64, drop: &BodyPartMask, dataset: &str) -> Result<LatentMotion> {
        let maps = self
            .read_in
            .get(dataset)
            .ok_or_else(|| Error::UnknownDataset(dataset.to_string()))?;
        if motion.ncols() != FRAME_DIM {
            return Err(Error::dim("read_in motion width", FRAME_DIM, motion.ncols()));
        }
        drop.require(MaskConvention::Drop)?;
        drop.require_frames(motion.nrows())?;
        let frames = motion.nrows();
        let mut grid = Array3::zeros((frames, NUM_HEADS, self.latent_dim));
        for k in 0..frames {
            let row = motion.row(k);
            let row = row.as_slice().expect("standard layout");
            for part in Part::ALL {
                let p = part.index();
                let mut cell = grid.slice_mut(ndarray::s![k, p, ..]);
                if drop.get(k, p) {
                    cell.assign(&self.empty_tokens.row(p));
                } else {
                    let x = Array1::from(self.layout.gather(part, row));
                    cell.assign(&maps[p].forward_vec(&x.view()));
                }
            }
        }
        LatentMotion::new(grid, LatentMotion::frame_times(frames, fps))
    }

    pub fn read_out(&self, latent: &Array3<f64>, dataset: &str) -> Result<Array2<f64>> {
        let maps = self
            .read_out
            .get(dataset)
            .ok_or_else(|| Error::UnknownDataset(dataset.to_string()))?;
        let (frames, heads, d) = latent.dim();
        if heads != NUM_HEADS || d != self.latent_dim {
            return Err(Error::dim("read_out latent width", self.latent_dim, d));
        }
        let mut out = Array2::zeros((frames, FRAME_DIM));
        for k in 0..frames {
            let mut row = out.row_mut(k);
            let row = row.as_slice_mut().expect("standard layout");
            for part in Part::ALL {
                let y = maps[part.index()].forward_vec(&latent.slice(ndarray::s![k, part.index(), ..]));
                self.layout.scatter(part, y.as_slice().expect("contiguous"), row);
            }
        }
        Ok(out)
    }
}
