//! Normalization primitives. The backward formulas follow from
//! differentiating through the batch statistics:
//!
//!   dx = inv_std * (g_hat - mean(g_hat) - x_hat * mean(g_hat * x_hat))
//!
//! with `g_hat = g * gamma`, applied per row (layer norm) or per channel
//! (batch norm, train mode). Eval-mode batch norm treats the running
//! statistics as constants.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::tape::Tape;
use super::tensor::Tensor;

/// Batch statistics produced by a train-mode batch-norm forward, used by the
/// layer to update its running estimates.
pub struct BatchStats<S> {
    pub mean: Vec<S>,
    /// Unbiased (n-1 denominator) variance, matching the running-stat convention.
    pub var_unbiased: Vec<S>,
}

impl<S: Scalar> Tape<S> {
    /// Per-row normalization of `[N,D]` to mean 0 / variance 1, then affine
    /// `gamma * x_hat + beta`.
    pub fn layer_norm(
        &self,
        x: &Tensor<S>,
        gamma: &Tensor<S>,
        beta: &Tensor<S>,
        eps: f64,
    ) -> Result<Tensor<S>> {
        let (n, d) = Self::want_matrix("layer_norm", x)?;
        if gamma.shape() != [d] || beta.shape() != [d] {
            return Err(Error::ShapeMismatch {
                op: "layer_norm",
                detail: format!(
                    "input [{n},{d}] vs gamma {:?}, beta {:?}",
                    gamma.shape(),
                    beta.shape()
                ),
            });
        }
        let eps = S::from_f64(eps);
        let gd = gamma.to_vec();
        let bd = beta.to_vec();
        let xd = x.data();

        let inv_d = S::ONE / S::from_usize(d);
        let mut x_hat = vec![S::ZERO; n * d];
        let mut inv_std = vec![S::ZERO; n];
        let mut out = vec![S::ZERO; n * d];
        for r in 0..n {
            let row = &xd[r * d..(r + 1) * d];
            let mut mean = S::ZERO;
            for v in row {
                mean += *v;
            }
            mean *= inv_d;
            let mut var = S::ZERO;
            for v in row {
                let c = *v - mean;
                var += c * c;
            }
            var *= inv_d;
            let inv = S::ONE / (var + eps).sqrt();
            inv_std[r] = inv;
            for (j, v) in row.iter().enumerate() {
                let xh = (*v - mean) * inv;
                x_hat[r * d + j] = xh;
                out[r * d + j] = gd[j] * xh + bd[j];
            }
        }
        drop(xd);

        let gamma_data = gd;
        Ok(self.push(&[x, gamma, beta], out, &[n, d], move |g| {
            let mut dx = vec![S::ZERO; n * d];
            let mut dgamma = vec![S::ZERO; d];
            let mut dbeta = vec![S::ZERO; d];
            for (r, inv) in inv_std.iter().enumerate() {
                let base = r * d;
                let mut mean_gh = S::ZERO;
                let mut mean_ghx = S::ZERO;
                for j in 0..d {
                    let gh = g[base + j] * gamma_data[j];
                    mean_gh += gh;
                    mean_ghx += gh * x_hat[base + j];
                    dgamma[j] += g[base + j] * x_hat[base + j];
                    dbeta[j] += g[base + j];
                }
                mean_gh *= inv_d;
                mean_ghx *= inv_d;
                for j in 0..d {
                    let gh = g[base + j] * gamma_data[j];
                    dx[base + j] = *inv * (gh - mean_gh - x_hat[base + j] * mean_ghx);
                }
            }
            vec![Some(dx), Some(dgamma), Some(dbeta)]
        }))
    }

    /// Train-mode batch norm over `[N,C,H,W]`: per-channel statistics over
    /// the batch and spatial dims, differentiated through.
    pub fn batch_norm2d_train(
        &self,
        x: &Tensor<S>,
        gamma: &Tensor<S>,
        beta: &Tensor<S>,
        eps: f64,
    ) -> Result<(Tensor<S>, BatchStats<S>)> {
        let s = x.shape();
        if s.len() != 4 {
            return Err(Error::ShapeMismatch {
                op: "batch_norm2d",
                detail: format!("expected NCHW, got {s:?}"),
            });
        }
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        if gamma.shape() != [c] || beta.shape() != [c] {
            return Err(Error::ShapeMismatch {
                op: "batch_norm2d",
                detail: format!("{c}-channel input vs gamma {:?}", gamma.shape()),
            });
        }
        let eps = S::from_f64(eps);
        let m = n * h * w; // elements per channel
        let inv_m = S::ONE / S::from_usize(m);
        let plane = h * w;

        let gd = gamma.to_vec();
        let bd = beta.to_vec();
        let xd = x.data();

        let mut mean = vec![S::ZERO; c];
        let mut var = vec![S::ZERO; c];
        for ch in 0..c {
            let mut acc = S::ZERO;
            for b in 0..n {
                let base = (b * c + ch) * plane;
                for v in &xd[base..base + plane] {
                    acc += *v;
                }
            }
            mean[ch] = acc * inv_m;
            let mut vacc = S::ZERO;
            for b in 0..n {
                let base = (b * c + ch) * plane;
                for v in &xd[base..base + plane] {
                    let cdev = *v - mean[ch];
                    vacc += cdev * cdev;
                }
            }
            var[ch] = vacc * inv_m;
        }

        let mut inv_std = vec![S::ZERO; c];
        let mut x_hat = vec![S::ZERO; n * c * plane];
        let mut out = vec![S::ZERO; n * c * plane];
        for ch in 0..c {
            inv_std[ch] = S::ONE / (var[ch] + eps).sqrt();
            for b in 0..n {
                let base = (b * c + ch) * plane;
                for i in base..base + plane {
                    let xh = (xd[i] - mean[ch]) * inv_std[ch];
                    x_hat[i] = xh;
                    out[i] = gd[ch] * xh + bd[ch];
                }
            }
        }
        drop(xd);

        let var_unbiased = if m > 1 {
            let corr = S::from_usize(m) / S::from_usize(m - 1);
            var.iter().map(|v| *v * corr).collect()
        } else {
            var.clone()
        };
        let stats = BatchStats { mean: mean.clone(), var_unbiased };

        let gamma_data = gd;
        let out_t = self.push(&[x, gamma, beta], out, &s, move |g| {
            let mut dx = vec![S::ZERO; n * c * plane];
            let mut dgamma = vec![S::ZERO; c];
            let mut dbeta = vec![S::ZERO; c];
            for ch in 0..c {
                let mut mean_gh = S::ZERO;
                let mut mean_ghx = S::ZERO;
                for b in 0..n {
                    let base = (b * c + ch) * plane;
                    for i in base..base + plane {
                        let gh = g[i] * gamma_data[ch];
                        mean_gh += gh;
                        mean_ghx += gh * x_hat[i];
                        dgamma[ch] += g[i] * x_hat[i];
                        dbeta[ch] += g[i];
                    }
                }
                mean_gh *= inv_m;
                mean_ghx *= inv_m;
                for b in 0..n {
                    let base = (b * c + ch) * plane;
                    for i in base..base + plane {
                        let gh = g[i] * gamma_data[ch];
                        dx[i] = inv_std[ch] * (gh - mean_gh - x_hat[i] * mean_ghx);
                    }
                }
            }
            vec![Some(dx), Some(dgamma), Some(dbeta)]
        });
        Ok((out_t, stats))
    }

    /// Eval-mode batch norm: a fixed per-channel affine transform under the
    /// running statistics.
    pub fn batch_norm2d_eval(
        &self,
        x: &Tensor<S>,
        gamma: &Tensor<S>,
        beta: &Tensor<S>,
        running_mean: &[S],
        running_var: &[S],
        eps: f64,
    ) -> Result<Tensor<S>> {
        let s = x.shape();
        if s.len() != 4 {
            return Err(Error::ShapeMismatch {
                op: "batch_norm2d",
                detail: format!("expected NCHW, got {s:?}"),
            });
        }
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        if gamma.shape() != [c] || running_mean.len() != c || running_var.len() != c {
            return Err(Error::ShapeMismatch {
                op: "batch_norm2d",
                detail: format!("{c}-channel input vs gamma {:?}", gamma.shape()),
            });
        }
        let eps = S::from_f64(eps);
        let plane = h * w;
        let gd = gamma.to_vec();
        let bd = beta.to_vec();
        let inv_std: Vec<S> =
            running_var.iter().map(|v| S::ONE / (*v + eps).sqrt()).collect();
        let rm = running_mean.to_vec();

        let xd = x.data();
        let mut out = vec![S::ZERO; n * c * plane];
        let mut x_hat = vec![S::ZERO; n * c * plane];
        for ch in 0..c {
            for b in 0..n {
                let base = (b * c + ch) * plane;
                for i in base..base + plane {
                    let xh = (xd[i] - rm[ch]) * inv_std[ch];
                    x_hat[i] = xh;
                    out[i] = gd[ch] * xh + bd[ch];
                }
            }
        }
        drop(xd);

        let gamma_data = gd;
        Ok(self.push(&[x, gamma, beta], out, &s, move |g| {
            let mut dx = vec![S::ZERO; n * c * plane];
            let mut dgamma = vec![S::ZERO; c];
            let mut dbeta = vec![S::ZERO; c];
            for ch in 0..c {
                let k = gamma_data[ch] * inv_std[ch];
                for b in 0..n {
                    let base = (b * c + ch) * plane;
                    for i in base..base + plane {
                        dx[i] = g[i] * k;
                        dgamma[ch] += g[i] * x_hat[i];
                        dbeta[ch] += g[i];
                    }
                }
            }
            vec![Some(dx), Some(dgamma), Some(dbeta)]
        }))
    }
}
