use crate::autodiff::{Tape, Tensor};
use crate::error::Result;
use crate::rng::Rng;
use crate::scalar::Scalar;

use super::init::{init_weight, InitScheme};
use super::NamedTensor;

/// 2-D convolution layer with per-channel bias.
pub struct Conv2d<S: Scalar> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
    pub stride: usize,
    pub pad: usize,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
}

impl<S: Scalar> Conv2d<S> {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        scheme: InitScheme,
        rng: &mut Rng,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        let n = out_channels * in_channels * kernel * kernel;
        let weight = Tensor::param(
            init_weight(scheme, rng, fan_in, n),
            &[out_channels, in_channels, kernel, kernel],
        );
        let bias = Tensor::param(vec![S::ZERO; out_channels], &[out_channels]);
        Conv2d { weight, bias, stride, pad, in_channels, out_channels, kernel }
    }

    pub fn forward(&self, tape: &Tape<S>, x: &Tensor<S>) -> Result<Tensor<S>> {
        let y = tape.conv2d(x, &self.weight, self.stride, self.pad)?;
        tape.add_channel_bias(&y, &self.bias)
    }

    /// `out_ch * in_ch * k^2 + out_ch`
    pub fn param_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel + self.out_channels
    }

    pub fn append_params(&self, prefix: &str, out: &mut Vec<NamedTensor<S>>) {
        out.push(NamedTensor::new(format!("{prefix}.weight"), self.weight.clone(), true));
        out.push(NamedTensor::new(format!("{prefix}.bias"), self.bias.clone(), true));
    }
}
