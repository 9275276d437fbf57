//! Finite-difference check suite over every differentiable layer.
//!
//! Runs in `f64`. Inputs for the piecewise-linear layers (relu, max pool)
//! are kept away from their fold points so the central difference sees a
//! single linear piece.

use crate::autodiff::{finite_difference_check_multi, Tape, Tensor};
use crate::error::Result;
use crate::rng::Rng;

use super::init::InitScheme;
use super::{Conv2d, LayerNorm, Linear};

pub const SUITE_EPS: f64 = 1e-5;
/// Acceptance threshold for every layer check.
pub const SUITE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct LayerCheck {
    pub layer: &'static str,
    pub instances: usize,
    pub max_rel_error: f64,
}

impl LayerCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error < SUITE_TOLERANCE
    }
}

fn gauss_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gauss()).collect()
}

/// Coarsely quantized values with index tie-breaks: any two entries differ by
/// at least 1e-3, so pooling argmaxes cannot flip under a 1e-5 perturbation.
fn separated_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|i| (rng.gauss() * 8.0).round() / 8.0 + i as f64 * 1e-3).collect()
}

fn check_linear(rng: &mut Rng) -> Result<f64> {
    let (n, d_in, d_out) = (2 + rng.below(3), 2 + rng.below(4), 1 + rng.below(4));
    let layer: Linear<f64> = Linear::new(d_in, d_out, InitScheme::KaimingUniform, rng);
    let x = Tensor::from_vec(gauss_vec(rng, n * d_in), &[n, d_in]);
    let probes = [x.clone(), layer.weight.clone(), layer.bias.clone()];
    finite_difference_check_multi(
        |tape| {
            let y = layer.forward(tape, &x)?;
            let sq = tape.mul(&y, &y)?;
            tape.sum(&sq)
        },
        &probes,
        SUITE_EPS,
    )
}

fn check_conv2d(rng: &mut Rng) -> Result<f64> {
    let (n, ci, co) = (1 + rng.below(2), 1 + rng.below(2), 1 + rng.below(3));
    let (h, w) = (5 + rng.below(3), 5 + rng.below(3));
    let stride = 1 + rng.below(2);
    let pad = rng.below(2);
    let layer: Conv2d<f64> = Conv2d::new(ci, co, 3, stride, pad, InitScheme::KaimingUniform, rng);
    layer.bias.set_data(&gauss_vec(rng, co));
    let x = Tensor::from_vec(gauss_vec(rng, n * ci * h * w), &[n, ci, h, w]);
    let probes = [x.clone(), layer.weight.clone(), layer.bias.clone()];
    finite_difference_check_multi(
        |tape| {
            let y = layer.forward(tape, &x)?;
            let sq = tape.mul(&y, &y)?;
            tape.sum(&sq)
        },
        &probes,
        SUITE_EPS,
    )
}

fn check_relu_composite(rng: &mut Rng) -> Result<f64> {
    // linear -> relu -> linear, resampled until no relu input sits near zero.
    let (n, d_in, d_mid, d_out) = (1 + rng.below(3), 2 + rng.below(3), 2 + rng.below(4), 1 + rng.below(3));
    let l1: Linear<f64> = Linear::new(d_in, d_mid, InitScheme::KaimingUniform, rng);
    let l2: Linear<f64> = Linear::new(d_mid, d_out, InitScheme::KaimingUniform, rng);
    let x = loop {
        let candidate = Tensor::from_vec(gauss_vec(rng, n * d_in), &[n, d_in]);
        let tape = Tape::inference();
        let h = l1.forward(&tape, &candidate)?;
        if h.to_vec().iter().all(|v| v.abs() > 1e-3) {
            break candidate;
        }
    };
    let probes = [x.clone(), l1.weight.clone(), l1.bias.clone(), l2.weight.clone(), l2.bias.clone()];
    finite_difference_check_multi(
        |tape| {
            let h = l1.forward(tape, &x)?;
            let a = tape.relu(&h)?;
            let y = l2.forward(tape, &a)?;
            let sq = tape.mul(&y, &y)?;
            tape.sum(&sq)
        },
        &probes,
        SUITE_EPS,
    )
}

fn check_layer_norm(rng: &mut Rng) -> Result<f64> {
    let (n, d) = (1 + rng.below(3), 3 + rng.below(6));
    let ln: LayerNorm<f64> = LayerNorm::new(d);
    ln.gamma.set_data(&gauss_vec(rng, d));
    ln.beta.set_data(&gauss_vec(rng, d));
    let x = Tensor::from_vec(gauss_vec(rng, n * d), &[n, d]);
    let probes = [x.clone(), ln.gamma.clone(), ln.beta.clone()];
    finite_difference_check_multi(
        |tape| {
            let y = ln.forward(tape, &x)?;
            let sq = tape.mul(&y, &y)?;
            tape.sum(&sq)
        },
        &probes,
        SUITE_EPS,
    )
}

fn check_batch_norm_train(rng: &mut Rng) -> Result<f64> {
    let (n, c, h, w) = (2 + rng.below(2), 1 + rng.below(3), 3, 3);
    let gamma = Tensor::param(gauss_vec(rng, c), &[c]);
    let beta = Tensor::param(gauss_vec(rng, c), &[c]);
    let x = Tensor::from_vec(gauss_vec(rng, n * c * h * w), &[n, c, h, w]);
    let probes = [x.clone(), gamma.clone(), beta.clone()];
    finite_difference_check_multi(
        |tape| {
            let (y, _stats) = tape.batch_norm2d_train(&x, &gamma, &beta, 1e-5)?;
            let sq = tape.mul(&y, &y)?;
            tape.sum(&sq)
        },
        &probes,
        SUITE_EPS,
    )
}

fn check_softmax_cross_entropy(rng: &mut Rng) -> Result<f64> {
    let (n, c) = (1 + rng.below(4), 2 + rng.below(8));
    let labels: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
    let logits = Tensor::from_vec(gauss_vec(rng, n * c), &[n, c]);
    let probes = [logits.clone()];
    finite_difference_check_multi(
        |tape| tape.softmax_cross_entropy(&logits, &labels),
        &probes,
        SUITE_EPS,
    )
}

fn check_max_pool(rng: &mut Rng) -> Result<f64> {
    let (n, c) = (1 + rng.below(2), 1 + rng.below(2));
    let (h, w) = (6, 6);
    let kernel = 2 + rng.below(2);
    let x = Tensor::from_vec(separated_vec(rng, n * c * h * w), &[n, c, h, w]);
    let probes = [x.clone()];
    finite_difference_check_multi(
        |tape| {
            let y = tape.max_pool2d(&x, kernel, kernel)?;
            let sq = tape.mul(&y, &y)?;
            tape.sum(&sq)
        },
        &probes,
        SUITE_EPS,
    )
}

fn check_global_avg_pool(rng: &mut Rng) -> Result<f64> {
    let (n, c, h, w) = (1 + rng.below(2), 1 + rng.below(3), 4, 4);
    let x = Tensor::from_vec(gauss_vec(rng, n * c * h * w), &[n, c, h, w]);
    let probes = [x.clone()];
    finite_difference_check_multi(
        |tape| {
            let y = tape.global_avg_pool(&x)?;
            let sq = tape.mul(&y, &y)?;
            tape.sum(&sq)
        },
        &probes,
        SUITE_EPS,
    )
}

type LayerCheckFn = fn(&mut Rng) -> Result<f64>;

/// Run `instances` random checks for every differentiable layer.
pub fn run_layer_suite(seed: u64, instances: usize) -> Result<Vec<LayerCheck>> {
    let checks: [(&'static str, LayerCheckFn); 8] = [
        ("linear", check_linear),
        ("conv2d", check_conv2d),
        ("relu_composite", check_relu_composite),
        ("layer_norm", check_layer_norm),
        ("batch_norm2d_train", check_batch_norm_train),
        ("softmax_cross_entropy", check_softmax_cross_entropy),
        ("max_pool2d", check_max_pool),
        ("global_avg_pool", check_global_avg_pool),
    ];
    let mut out = Vec::with_capacity(checks.len());
    for (i, (name, f)) in checks.iter().enumerate() {
        let mut rng = Rng::derived(seed, i as u64);
        let mut worst = 0.0f64;
        for _ in 0..instances {
            let err = f(&mut rng)?;
            if err > worst {
                worst = err;
            }
        }
        out.push(LayerCheck { layer: name, instances, max_rel_error: worst });
    }
    Ok(out)
}
