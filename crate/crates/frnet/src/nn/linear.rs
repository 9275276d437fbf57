use crate::autodiff::{Tape, Tensor};
use crate::error::Result;
use crate::rng::Rng;
use crate::scalar::Scalar;

use super::init::{init_weight, InitScheme};
use super::NamedTensor;

/// Fully-connected layer: `y = x W + b` with `W: [d_in, d_out]`.
pub struct Linear<S: Scalar> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
    d_in: usize,
    d_out: usize,
}

impl<S: Scalar> Linear<S> {
    pub fn new(d_in: usize, d_out: usize, scheme: InitScheme, rng: &mut Rng) -> Self {
        let weight = Tensor::param(init_weight(scheme, rng, d_in, d_in * d_out), &[d_in, d_out]);
        let bias = Tensor::param(vec![S::ZERO; d_out], &[d_out]);
        Linear { weight, bias, d_in, d_out }
    }

    /// Square layer with `W = I`, `b = 0`; used to verify block composition.
    pub fn identity(d: usize) -> Self {
        let mut w = vec![S::ZERO; d * d];
        for i in 0..d {
            w[i * d + i] = S::ONE;
        }
        Linear {
            weight: Tensor::param(w, &[d, d]),
            bias: Tensor::param(vec![S::ZERO; d], &[d]),
            d_in: d,
            d_out: d,
        }
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn forward(&self, tape: &Tape<S>, x: &Tensor<S>) -> Result<Tensor<S>> {
        let h = tape.matmul(x, &self.weight)?;
        tape.add_bias(&h, &self.bias)
    }

    /// `d_in * d_out + d_out`
    pub fn param_count(&self) -> usize {
        self.d_in * self.d_out + self.d_out
    }

    pub fn append_params(&self, prefix: &str, out: &mut Vec<NamedTensor<S>>) {
        out.push(NamedTensor::new(format!("{prefix}.weight"), self.weight.clone(), true));
        out.push(NamedTensor::new(format!("{prefix}.bias"), self.bias.clone(), true));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_count_closed_form() {
        let mut rng = Rng::new(0);
        let layer: Linear<f32> = Linear::new(512, 64, InitScheme::KaimingUniform, &mut rng);
        assert_eq!(layer.param_count(), 512 * 64 + 64);
        assert_eq!(layer.param_count(), 32832);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let layer: Linear<f64> = Linear::identity(3);
        let tape = Tape::new();
        let x = Tensor::from_vec(vec![1.0, -2.0, 3.0, 4.0, 5.0, -6.0], &[2, 3]);
        let y = layer.forward(&tape, &x).unwrap();
        assert_eq!(y.to_vec(), x.to_vec());
    }

    #[test]
    fn single_row_sum() {
        // x = [1,1], W = [[1],[1]], b = [0] -> y = [2].
        let layer = Linear {
            weight: Tensor::param(vec![1.0f64, 1.0], &[2, 1]),
            bias: Tensor::param(vec![0.0], &[1]),
            d_in: 2,
            d_out: 1,
        };
        let tape = Tape::new();
        let x = Tensor::from_vec(vec![1.0, 1.0], &[1, 2]);
        let y = layer.forward(&tape, &x).unwrap();
        assert_eq!(y.to_vec(), vec![2.0]);
    }
}
