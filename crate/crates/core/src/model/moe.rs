use ndarray::{Array2, ArrayView2, Axis};

use crate::nn::{impl_params, softmax_axis, Linear};
use crate::rng::SeededRng;

/// Dense mixture of experts: every expert runs on every token and the
/// outputs are blended with softmax gate weights.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureOfExperts {
    pub gate: Linear,
    pub experts: Vec<Linear>,
}

impl_params!(MixtureOfExperts { gate, experts });

impl MixtureOfExperts {
    pub fn init(rng: &mut SeededRng, input: usize, output: usize, experts: usize) -> Self {
        Self {
            gate: Linear::init(rng, input, experts),
            experts: (0..experts).map(|_| Linear::init(rng, input, output)).collect(),
        }
    }

    /// `tokens × experts`, rows summing to 1.
    pub fn gate_weights(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        softmax_axis(&self.gate.forward(x).view(), Axis(1))
    }

    pub fn forward(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let g = self.gate_weights(x);
        let out_dim = self.experts[0].output_dim();
        let mut out = Array2::zeros((x.nrows(), out_dim));
        for (e, expert) in self.experts.iter().enumerate() {
            let y = expert.forward(x);
            let w = g.column(e).insert_axis(Axis(1));
            out += &(&y * &w);
        }
        out
    }
}
