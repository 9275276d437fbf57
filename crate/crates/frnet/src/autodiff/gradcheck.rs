//! Central finite-difference gradient checking.
//!
//! The analytic gradient of a scalar-valued graph is compared coordinate by
//! coordinate against `(f(x + eps) - f(x - eps)) / 2 eps`. Run this in `f64`;
//! single precision does not leave enough digits for the quotient.
//!
//! Graphs containing [`Tape::gradient_gate`] are handled by checking the
//! differentiable surrogate: gate outputs are captured at the linearization
//! point and replayed as constants during the perturbed evaluations, matching
//! the gate's backward contract (the gated branch contributes no gradient).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::tape::Tape;
use super::tensor::Tensor;

/// Reasonable default step for `f64` checks.
pub const DEFAULT_EPS: f64 = 1e-5;

/// Max over coordinates of `|analytic - central| / max(1, |central|)` for a
/// scalar function of one tensor.
pub fn finite_difference_check<S, F>(f: F, x: &Tensor<S>, eps: f64) -> Result<f64>
where
    S: Scalar,
    F: Fn(&Tape<S>, &Tensor<S>) -> Result<Tensor<S>>,
{
    let probe = x.clone();
    finite_difference_check_multi(|tape| f(tape, &probe), std::slice::from_ref(x), eps)
}

/// Same check against a set of probe tensors read by `build` (layer inputs
/// and parameters). Probe values are perturbed in place and restored.
pub fn finite_difference_check_multi<S, F>(
    build: F,
    probes: &[Tensor<S>],
    eps: f64,
) -> Result<f64>
where
    S: Scalar,
    F: Fn(&Tape<S>) -> Result<Tensor<S>>,
{
    assert!(eps > 0.0, "eps must be positive");
    let saved_flags: Vec<bool> = probes.iter().map(|p| p.requires_grad()).collect();
    for p in probes {
        p.set_requires_grad(true);
        p.clear_grad();
    }

    let result = fd_check_inner(&build, probes, eps);

    for (p, flag) in probes.iter().zip(saved_flags) {
        p.clear_grad();
        p.set_requires_grad(flag);
    }
    result
}

fn fd_check_inner<S, F>(build: &F, probes: &[Tensor<S>], eps: f64) -> Result<f64>
where
    S: Scalar,
    F: Fn(&Tape<S>) -> Result<Tensor<S>>,
{
    // Analytic pass at the linearization point, capturing gate outputs.
    let tape = Tape::with_gate_recording();
    let loss = build(&tape)?;
    if loss.numel() != 1 {
        return Err(Error::NonScalarLoss { numel: loss.numel() });
    }
    tape.backward(&loss)?;
    let analytic: Vec<Vec<f64>> = probes
        .iter()
        .map(|p| {
            p.grad()
                .map(|g| g.iter().map(|v| v.to_f64()).collect())
                .unwrap_or_else(|| vec![0.0; p.numel()])
        })
        .collect();
    let gate_cache = tape.take_gate_cache();

    let eval = || -> Result<f64> {
        let t = Tape::inference_with_gate_replay(gate_cache.clone());
        let out = build(&t)?;
        if out.numel() != 1 {
            return Err(Error::NonScalarLoss { numel: out.numel() });
        }
        Ok(out.to_vec()[0].to_f64())
    };

    let step = S::from_f64(eps);
    let mut max_err = 0.0f64;
    for (p, an) in probes.iter().zip(&analytic) {
        for i in 0..p.numel() {
            let original = p.data()[i];
            p.update_data(|d| d[i] = original + step);
            let f_plus = eval()?;
            p.update_data(|d| d[i] = original - step);
            let f_minus = eval()?;
            p.update_data(|d| d[i] = original);

            let central = (f_plus - f_minus) / (2.0 * eps);
            let err = (an[i] - central).abs() / 1.0f64.max(central.abs());
            if err > max_err {
                max_err = err;
            }
        }
    }
    Ok(max_err)
}
