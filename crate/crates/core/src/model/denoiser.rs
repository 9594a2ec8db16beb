use ndarray::{Array2, Array3};

use super::builder::TemplateBuilder;
use super::config::{ModelConfig, NUM_HEADS};
use super::readio::{LatentMotion, ReadIo};
use super::spatial::SpatialAttention;
use super::stylize::Stylization;
use super::templates::TemporalAttention;
use crate::condition::{ConditionSet, Refiner};
use crate::error::Result;
use crate::nn::{impl_params, FeedForward, LayerNorm};
use crate::repr::{MotionSequence, NUM_PARTS};
use crate::rng::{self, SeededRng};
use crate::temporal::{BodyPartMask, MaskConvention};

/// One pre-norm block: stylized features feed spatial and temporal
/// attention whose outputs are summed into the residual stream, followed by
/// a position-wise feed-forward block.
#[derive(Clone, Debug, PartialEq)]
pub struct ArtLayer {
    pub norm1: LayerNorm,
    pub stylization: Stylization,
    pub spatial: SpatialAttention,
    pub builder: TemplateBuilder,
    pub temporal: TemporalAttention,
    pub norm2: LayerNorm,
    pub ff: FeedForward,
}

impl_params!(ArtLayer {
    norm1,
    stylization,
    spatial,
    builder,
    temporal,
    norm2,
    ff,
});

fn rowwise(x: &Array3<f64>, f: impl Fn(&ndarray::ArrayView2<f64>) -> Array2<f64>) -> Array3<f64> {
    let (a, b, c) = x.dim();
    let flat = x.view().into_shape_with_order((a * b, c)).expect("standard layout");
    f(&flat).into_shape_with_order((a, b, c)).expect("same size")
}

impl ArtLayer {
    pub fn init(rng: &mut SeededRng, config: &ModelConfig) -> Self {
        let d = config.latent_dim;
        Self {
            norm1: LayerNorm::new(d),
            stylization: Stylization::init(rng, config),
            spatial: SpatialAttention::init(rng, d),
            builder: TemplateBuilder::init(rng, config),
            temporal: TemporalAttention::init(rng, NUM_HEADS, d),
            norm2: LayerNorm::new(d),
            ff: FeedForward::init(rng, d, 4 * d),
        }
    }

    pub fn forward(&self, h: &LatentMotion, ctx: &LayerContext<'_>) -> Result<LatentMotion> {
        let z = rowwise(&h.grid, |x| self.norm1.forward(x));
        let z = self.stylization.stylize(&z, ctx.t_step, ctx.fps, ctx.dataset)?;
        let ys = self.spatial.forward(&z, ctx.available)?;
        let templates = self.builder.build(&z, h.duration(), ctx.conditions)?;
        let yt = self.temporal.forward(&templates, &h.times)?;
        let mid = &h.grid + &ys + &yt;
        let f = rowwise(&mid, |x| self.ff.forward(&self.norm2.forward(x).view()));
        LatentMotion::new(mid + f, h.times.clone())
    }
}

/// Per-call inputs shared by every layer.
pub struct LayerContext<'a> {
    pub t_step: usize,
    pub fps: f64,
    pub dataset: &'a str,
    pub available: &'a [[bool; NUM_PARTS]],
    pub conditions: &'a ConditionSet,
}

/// The full `x_t → x̂_0` network with parameters drawn from one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct Denoiser {
    config: ModelConfig,
    pub read_io: ReadIo,
    pub refiner: Refiner,
    pub layers: Vec<ArtLayer>,
}

impl_params!(Denoiser { read_io, refiner, layers });

impl Denoiser {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::seeded(seed);
        let read_io = ReadIo::init(&mut rng, &config);
        let refiner = Refiner::from_rng(&mut rng, config.condition_width());
        let layers = (0..config.num_layers).map(|_| ArtLayer::init(&mut rng, &config)).collect();
        Ok(Self {
            config,
            read_io,
            refiner,
            layers,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Runs every modality's tokens through the refiner.
    pub fn refine_conditions(&self, conditions: &ConditionSet) -> Result<ConditionSet> {
        conditions.map_tokens(|t| self.refiner.refine(t))
    }

    /// `motion` is `F × 669`; `drop` marks cells replaced by empty tokens.
    pub fn forward(
        &self,
        motion: &Array2<f64>,
        fps: f64,
        dataset: &str,
        t_step: usize,
        drop: &BodyPartMask,
        conditions: &ConditionSet,
    ) -> Result<Array2<f64>> {
        let mut h = self.read_io.read_in(motion, fps, drop, dataset)?;
        let refined = self.refine_conditions(conditions)?;
        let available = availability(drop);
        let ctx = LayerContext {
            t_step,
            fps,
            dataset,
            available: &available,
            conditions: &refined,
        };
        for layer in &self.layers {
            h = layer.forward(&h, &ctx)?;
        }
        self.read_io.read_out(&h.grid, dataset)
    }
}

/// Parts usable as spatial keys: everything not dropped. A frame whose
/// parts are all dropped falls back to attending over the empty tokens.
fn availability(drop: &BodyPartMask) -> Vec<[bool; NUM_PARTS]> {
    drop.rows()
        .iter()
        .map(|row| {
            let avail = row.map(|d| !d);
            if avail.iter().any(|&a| a) {
                avail
            } else {
                [true; NUM_PARTS]
            }
        })
        .collect()
}

/// Predicts the clean motion for a noisy clip. The result keeps the input's
/// frame rate and metadata.
pub fn denoiser_forward(
    model: &Denoiser,
    x_t: &MotionSequence,
    t_step: usize,
    drop: &BodyPartMask,
    conditions: &ConditionSet,
    dataset: &str,
) -> Result<MotionSequence> {
    drop.require(MaskConvention::Drop)?;
    let out = model.forward(&x_t.to_matrix(), x_t.fps(), dataset, t_step, drop, conditions)?;
    let mut seq = MotionSequence::from_matrix(&out, x_t.fps(), x_t.parts_present, x_t.dataset.clone())?;
    seq.rotation_source = x_t.rotation_source;
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condition::Modality;
    use crate::model::config::Preset;
    use crate::nn::uniform_matrix;
    use crate::repr::{canonical_layout, Part, FRAME_DIM};
    use crate::rng::seeded;

    fn desk() -> Denoiser {
        Denoiser::new(ModelConfig::preset(Preset::Desk), 42).unwrap()
    }

    #[test]
    fn shape_and_finiteness() {
        let m = desk();
        let x = uniform_matrix(&mut seeded(1), 9, FRAME_DIM, 1.0);
        let drop = BodyPartMask::zeros(9, MaskConvention::Drop);
        let y = m.forward(&x, 30.0, "all", 500, &drop, &ConditionSet::empty(80)).unwrap();
        assert_eq!(y.dim(), (9, FRAME_DIM));
        assert!(y.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn dropped_cells_do_not_leak() {
        let m = desk();
        let x = uniform_matrix(&mut seeded(1), 6, FRAME_DIM, 1.0);
        let drop = BodyPartMask::drop_parts(6, &[Part::Face, Part::RightHand]);
        let mut y = x.clone();
        let layout = canonical_layout();
        for k in 0..6 {
            for i in layout.indices(Part::Face).chain(layout.indices(Part::RightHand)) {
                y[(k, i)] = 50.0 * (i as f64).sin();
            }
        }
        let cond = ConditionSet::empty(80)
            .with(Modality::Speech, uniform_matrix(&mut seeded(3), 4, 80, 1.0))
            .unwrap();
        let a = m.forward(&x, 30.0, "BEAT", 10, &drop, &cond).unwrap();
        let b = m.forward(&y, 30.0, "BEAT", 10, &drop, &cond).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fully_dropped_frame_is_accepted() {
        let m = desk();
        let x = uniform_matrix(&mut seeded(1), 4, FRAME_DIM, 1.0);
        let mut drop = BodyPartMask::zeros(4, MaskConvention::Drop);
        for p in 0..NUM_PARTS {
            drop.set(2, p, true);
        }
        assert!(m.forward(&x, 30.0, "all", 0, &drop, &ConditionSet::empty(80)).is_ok());
    }

    #[test]
    fn deterministic_across_instances() {
        let x = uniform_matrix(&mut seeded(1), 5, FRAME_DIM, 1.0);
        let drop = BodyPartMask::zeros(5, MaskConvention::Drop);
        let e = ConditionSet::empty(80);
        let a = desk().forward(&x, 20.0, "AMASS", 3, &drop, &e).unwrap();
        let b = desk().forward(&x, 20.0, "AMASS", 3, &drop, &e).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn visibility_mask_rejected() {
        let m = desk();
        let x = uniform_matrix(&mut seeded(1), 3, FRAME_DIM, 1.0);
        let seq = MotionSequence::from_matrix(&x, 30.0, [true; NUM_PARTS], "all").unwrap();
        let vis = BodyPartMask::zeros(3, MaskConvention::Visibility);
        assert!(denoiser_forward(&m, &seq, 0, &vis, &ConditionSet::empty(80), "all").is_err());
    }
}
