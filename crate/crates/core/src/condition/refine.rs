use ndarray::{s, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::nn::{impl_params, softmax_axis, FeedForward, LayerNorm, Linear};
use crate::rng::{self, SeededRng};

/// Post-norm transformer encoder layer: multi-head self-attention and a
/// feed-forward block, each wrapped in a residual and layer norm.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderLayer {
    heads: usize,
    pub qkv: Linear,
    pub out: Linear,
    pub norm1: LayerNorm,
    pub ff: FeedForward,
    pub norm2: LayerNorm,
}

impl_params!(EncoderLayer { qkv, out, norm1, ff, norm2 });

impl EncoderLayer {
    pub fn init(rng: &mut SeededRng, width: usize, heads: usize) -> Self {
        assert!(heads > 0 && width.is_multiple_of(heads), "width must split evenly across heads");
        Self {
            heads,
            qkv: Linear::init(rng, width, 3 * width),
            out: Linear::init(rng, width, width),
            norm1: LayerNorm::new(width),
            ff: FeedForward::init(rng, width, 2 * width),
            norm2: LayerNorm::new(width),
        }
    }

    pub fn forward(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let width = x.ncols();
        let hd = width / self.heads;
        let qkv = self.qkv.forward(x);
        let scale = 1.0 / (hd as f64).sqrt();
        let mut attended = Array2::zeros(x.raw_dim());
        for h in 0..self.heads {
            let q = qkv.slice(s![.., h * hd..(h + 1) * hd]);
            let k = qkv.slice(s![.., width + h * hd..width + (h + 1) * hd]);
            let v = qkv.slice(s![.., 2 * width + h * hd..2 * width + (h + 1) * hd]);
            let scores = q.dot(&k.t()) * scale;
            let weights = softmax_axis(&scores.view(), Axis(1));
            attended.slice_mut(s![.., h * hd..(h + 1) * hd]).assign(&weights.dot(&v));
        }
        let a = self.out.forward(&attended.view());
        let x1 = self.norm1.forward(&(x + &a).view());
        let f = self.ff.forward(&x1.view());
        self.norm2.forward(&(&x1 + &f).view())
    }
}

/// Two encoder layers applied to condition tokens before they reach the
/// denoiser. Parameters come from a seeded generator.
#[derive(Clone, Debug, PartialEq)]
pub struct Refiner {
    width: usize,
    /// Add sinusoidal token positions before the first layer.
    pub positional_encoding: bool,
    pub layers: Vec<EncoderLayer>,
}

impl_params!(Refiner { layers });

impl Refiner {
    pub fn new(width: usize, seed: u64) -> Self {
        Self::from_rng(&mut rng::seeded(seed), width)
    }

    pub fn from_rng(rng: &mut SeededRng, width: usize) -> Self {
        let heads = if width.is_multiple_of(10) { 10 } else { 1 };
        let layers = (0..2).map(|_| EncoderLayer::init(rng, width, heads)).collect();
        Self {
            width,
            positional_encoding: true,
            layers,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn refine(&self, tokens: &Array2<f64>) -> Result<Array2<f64>> {
        if tokens.ncols() != self.width {
            return Err(Error::dim("refiner input width", self.width, tokens.ncols()));
        }
        let mut x = tokens.clone();
        if self.positional_encoding {
            for (i, mut row) in x.rows_mut().into_iter().enumerate() {
                row += &crate::nn::sinusoidal(i as f64, self.width);
            }
        }
        for layer in &self.layers {
            x = layer.forward(&x.view());
        }
        Ok(x)
    }
}
