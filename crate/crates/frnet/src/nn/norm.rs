use crate::autodiff::{Tape, Tensor};
use crate::error::Result;
use crate::scalar::Scalar;

use super::{Mode, NamedTensor};

pub const LAYER_NORM_EPS: f64 = 1e-5;
pub const BATCH_NORM_EPS: f64 = 1e-5;
pub const BATCH_NORM_MOMENTUM: f64 = 0.1;

/// Per-row normalization with learnable scale and shift. Parameter count: 2d.
pub struct LayerNorm<S: Scalar> {
    pub gamma: Tensor<S>,
    pub beta: Tensor<S>,
    pub eps: f64,
    /// When false the normalization step is skipped and only the affine
    /// transform applies. Composition checks use this to make the layer an
    /// exact pass-through; regular construction always normalizes.
    pub normalize: bool,
    dim: usize,
}

impl<S: Scalar> LayerNorm<S> {
    pub fn new(dim: usize) -> Self {
        LayerNorm {
            gamma: Tensor::param(vec![S::ONE; dim], &[dim]),
            beta: Tensor::param(vec![S::ZERO; dim], &[dim]),
            eps: LAYER_NORM_EPS,
            normalize: true,
            dim,
        }
    }

    pub fn passthrough(dim: usize) -> Self {
        let mut ln = Self::new(dim);
        ln.normalize = false;
        ln
    }

    pub fn forward(&self, tape: &Tape<S>, x: &Tensor<S>) -> Result<Tensor<S>> {
        if self.normalize {
            tape.layer_norm(x, &self.gamma, &self.beta, self.eps)
        } else {
            let scaled = tape.row_mul(x, &self.gamma)?;
            tape.add_bias(&scaled, &self.beta)
        }
    }

    pub fn param_count(&self) -> usize {
        2 * self.dim
    }

    pub fn append_params(&self, prefix: &str, out: &mut Vec<NamedTensor<S>>) {
        out.push(NamedTensor::new(format!("{prefix}.gamma"), self.gamma.clone(), true));
        out.push(NamedTensor::new(format!("{prefix}.beta"), self.beta.clone(), true));
    }
}

/// Spatial batch normalization with running statistics.
///
/// Train mode normalizes by per-channel batch statistics (differentiated
/// through) and folds them into the running estimates; eval mode applies the
/// running estimates as constants. Single writer during training.
pub struct BatchNorm2d<S: Scalar> {
    pub gamma: Tensor<S>,
    pub beta: Tensor<S>,
    pub running_mean: Tensor<S>,
    pub running_var: Tensor<S>,
    pub eps: f64,
    pub momentum: f64,
    channels: usize,
}

impl<S: Scalar> BatchNorm2d<S> {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            gamma: Tensor::param(vec![S::ONE; channels], &[channels]),
            beta: Tensor::param(vec![S::ZERO; channels], &[channels]),
            running_mean: Tensor::from_vec(vec![S::ZERO; channels], &[channels]),
            running_var: Tensor::from_vec(vec![S::ONE; channels], &[channels]),
            eps: BATCH_NORM_EPS,
            momentum: BATCH_NORM_MOMENTUM,
            channels,
        }
    }

    pub fn forward(&self, tape: &Tape<S>, x: &Tensor<S>, mode: Mode) -> Result<Tensor<S>> {
        match mode {
            Mode::Train => {
                let (y, stats) = tape.batch_norm2d_train(x, &self.gamma, &self.beta, self.eps)?;
                let m = S::from_f64(self.momentum);
                let keep = S::ONE - m;
                self.running_mean.update_data(|rm| {
                    for (r, b) in rm.iter_mut().zip(&stats.mean) {
                        *r = keep * *r + m * *b;
                    }
                });
                self.running_var.update_data(|rv| {
                    for (r, b) in rv.iter_mut().zip(&stats.var_unbiased) {
                        *r = keep * *r + m * *b;
                    }
                });
                Ok(y)
            }
            Mode::Eval => tape.batch_norm2d_eval(
                x,
                &self.gamma,
                &self.beta,
                &self.running_mean.data(),
                &self.running_var.data(),
                self.eps,
            ),
        }
    }

    pub fn param_count(&self) -> usize {
        2 * self.channels
    }

    pub fn append_params(&self, prefix: &str, out: &mut Vec<NamedTensor<S>>) {
        out.push(NamedTensor::new(format!("{prefix}.gamma"), self.gamma.clone(), true));
        out.push(NamedTensor::new(format!("{prefix}.beta"), self.beta.clone(), true));
        out.push(NamedTensor::new(
            format!("{prefix}.running_mean"),
            self.running_mean.clone(),
            false,
        ));
        out.push(NamedTensor::new(
            format!("{prefix}.running_var"),
            self.running_var.clone(),
            false,
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::finite_difference_check_multi;

    #[test]
    fn constant_row_normalizes_to_zero() {
        let ln: LayerNorm<f64> = LayerNorm::new(4);
        let tape = Tape::new();
        let x = Tensor::from_vec(vec![5.0; 4], &[1, 4]);
        let y = ln.forward(&tape, &x).unwrap();
        assert!(y.to_vec().iter().all(|v| v.abs() < 1e-9), "{:?}", y.to_vec());
    }

    #[test]
    fn two_point_row_is_already_normalized() {
        // x = [1,-1] has mean 0 and variance 1; output matches up to the
        // epsilon correction.
        let ln: LayerNorm<f64> = LayerNorm::new(2);
        let tape = Tape::new();
        let x = Tensor::from_vec(vec![1.0, -1.0], &[1, 2]);
        let y = ln.forward(&tape, &x).unwrap().to_vec();
        assert!((y[0] - 1.0).abs() < 1e-5);
        assert!((y[1] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn normalized_rows_have_zero_mean_unit_variance() {
        let d = 16;
        let ln: LayerNorm<f64> = LayerNorm::new(d);
        let tape = Tape::new();
        let data: Vec<f64> = (0..3 * d).map(|i| ((i * 37 + 11) % 23) as f64 * 0.37 - 2.0).collect();
        let x = Tensor::from_vec(data, &[3, d]);
        let y = ln.forward(&tape, &x).unwrap().to_vec();
        for row in y.chunks_exact(d) {
            let mean: f64 = row.iter().sum::<f64>() / d as f64;
            let var: f64 = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            assert!(mean.abs() < 1e-6, "row mean {mean}");
            assert!((var - 1.0).abs() < 1e-4, "row variance {var}");
        }
    }

    #[test]
    fn layer_norm_gradient_matches_finite_differences() {
        let ln: LayerNorm<f64> = LayerNorm::new(5);
        let x = Tensor::from_vec(
            vec![0.3, -1.2, 0.8, 2.1, -0.4, 1.7, 0.2, -0.9, 0.5, 1.1],
            &[2, 5],
        );
        let probes = [x.clone(), ln.gamma.clone(), ln.beta.clone()];
        let err = finite_difference_check_multi(
            |tape| {
                let y = ln.forward(tape, &x)?;
                let sq = tape.mul(&y, &y)?;
                tape.sum(&sq)
            },
            &probes,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn batch_norm_eval_with_unit_stats_is_identity() {
        // Identity up to the epsilon correction: x / sqrt(1 + eps).
        let bn: BatchNorm2d<f64> = BatchNorm2d::new(2);
        let tape = Tape::new();
        let data: Vec<f64> = (0..2 * 2 * 3 * 3).map(|i| i as f64 * 0.1 - 0.8).collect();
        let x = Tensor::from_vec(data.clone(), &[2, 2, 3, 3]);
        let y = bn.forward(&tape, &x, Mode::Eval).unwrap();
        for (a, b) in y.to_vec().iter().zip(&data) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn train_mode_updates_running_stats_eval_does_not() {
        let bn: BatchNorm2d<f64> = BatchNorm2d::new(1);
        let x = Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0], &[1, 1, 2, 2]);

        let tape = Tape::new();
        bn.forward(&tape, &x, Mode::Eval).unwrap();
        assert_eq!(bn.running_mean.to_vec(), vec![0.0]);

        bn.forward(&tape, &x, Mode::Train).unwrap();
        let rm = bn.running_mean.to_vec()[0];
        assert!((rm - 0.1 * 2.5).abs() < 1e-12, "running mean {rm}");
    }
}
