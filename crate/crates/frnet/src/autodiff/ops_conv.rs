//! 2-D convolution and pooling. Direct loops: explicit zero padding,
//! stride >= 1, no dilation.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::tape::Tape;
use super::tensor::Tensor;

fn want_4d<S: Scalar>(op: &'static str, t: &Tensor<S>) -> Result<[usize; 4]> {
    let s = t.shape();
    if s.len() != 4 {
        return Err(Error::ShapeMismatch { op, detail: format!("expected NCHW, got {s:?}") });
    }
    Ok([s[0], s[1], s[2], s[3]])
}

fn out_extent(op: &'static str, input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::ShapeMismatch { op, detail: "stride must be >= 1".into() });
    }
    let padded = input + 2 * pad;
    if padded < kernel {
        return Err(Error::ShapeMismatch {
            op,
            detail: format!("kernel {kernel} larger than padded extent {padded}"),
        });
    }
    Ok((padded - kernel) / stride + 1)
}

impl<S: Scalar> Tape<S> {
    /// `x [N,Ci,H,W] * w [Co,Ci,kh,kw] -> [N,Co,H',W']`.
    pub fn conv2d(
        &self,
        x: &Tensor<S>,
        w: &Tensor<S>,
        stride: usize,
        pad: usize,
    ) -> Result<Tensor<S>> {
        let [n, ci, h, wd] = want_4d("conv2d", x)?;
        let [co, ci_w, kh, kw] = want_4d("conv2d", w)?;
        if ci != ci_w {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                detail: format!("input has {ci} channels, kernel expects {ci_w}"),
            });
        }
        let oh = out_extent("conv2d", h, kh, stride, pad)?;
        let ow = out_extent("conv2d", wd, kw, stride, pad)?;

        let xd = x.data();
        let wdat = w.data();
        let mut out = vec![S::ZERO; n * co * oh * ow];
        for b in 0..n {
            for oc in 0..co {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = S::ZERO;
                        for ic in 0..ci {
                            for ky in 0..kh {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kx in 0..kw {
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if ix < 0 || ix >= wd as isize {
                                        continue;
                                    }
                                    let xi = ((b * ci + ic) * h + iy as usize) * wd + ix as usize;
                                    let wi = ((oc * ci + ic) * kh + ky) * kw + kx;
                                    acc += xd[xi] * wdat[wi];
                                }
                            }
                        }
                        out[((b * co + oc) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        drop(xd);
        drop(wdat);

        let (xh, wh) = (x.clone(), w.clone());
        Ok(self.push(&[x, w], out, &[n, co, oh, ow], move |g| {
            let xd = xh.data();
            let wdat = wh.data();
            let mut dx = vec![S::ZERO; n * ci * h * wd];
            let mut dw = vec![S::ZERO; co * ci * kh * kw];
            for b in 0..n {
                for oc in 0..co {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let go = g[((b * co + oc) * oh + oy) * ow + ox];
                            for ic in 0..ci {
                                for ky in 0..kh {
                                    let iy = (oy * stride + ky) as isize - pad as isize;
                                    if iy < 0 || iy >= h as isize {
                                        continue;
                                    }
                                    for kx in 0..kw {
                                        let ix = (ox * stride + kx) as isize - pad as isize;
                                        if ix < 0 || ix >= wd as isize {
                                            continue;
                                        }
                                        let xi =
                                            ((b * ci + ic) * h + iy as usize) * wd + ix as usize;
                                        let wi = ((oc * ci + ic) * kh + ky) * kw + kx;
                                        dx[xi] += go * wdat[wi];
                                        dw[wi] += go * xd[xi];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            vec![Some(dx), Some(dw)]
        }))
    }

    /// Per-channel bias add on NCHW maps.
    pub fn add_channel_bias(&self, x: &Tensor<S>, bias: &Tensor<S>) -> Result<Tensor<S>> {
        let [n, c, h, w] = want_4d("add_channel_bias", x)?;
        if bias.shape() != [c] {
            return Err(Error::ShapeMismatch {
                op: "add_channel_bias",
                detail: format!("input has {c} channels, bias is {:?}", bias.shape()),
            });
        }
        let bd = bias.to_vec();
        let plane = h * w;
        let out: Vec<S> = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| *v + bd[(i / plane) % c])
            .collect();
        Ok(self.push(&[x, bias], out, &[n, c, h, w], move |g| {
            let mut db = vec![S::ZERO; c];
            for (i, gi) in g.iter().enumerate() {
                db[(i / plane) % c] += *gi;
            }
            vec![Some(g.to_vec()), Some(db)]
        }))
    }

    /// Non-padded max pooling; ties resolve to the first maximum in scan order.
    pub fn max_pool2d(&self, x: &Tensor<S>, kernel: usize, stride: usize) -> Result<Tensor<S>> {
        let [n, c, h, w] = want_4d("max_pool2d", x)?;
        if kernel == 0 || stride == 0 {
            return Err(Error::ShapeMismatch {
                op: "max_pool2d",
                detail: "kernel and stride must be >= 1".into(),
            });
        }
        if h < kernel || w < kernel {
            return Err(Error::ShapeMismatch {
                op: "max_pool2d",
                detail: format!("kernel {kernel} larger than map {h}x{w}"),
            });
        }
        let oh = (h - kernel) / stride + 1;
        let ow = (w - kernel) / stride + 1;

        let xd = x.data();
        let mut out = vec![S::ZERO; n * c * oh * ow];
        let mut argmax = vec![0usize; n * c * oh * ow];
        for b in 0..n {
            for ch in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best_idx = ((b * c + ch) * h + oy * stride) * w + ox * stride;
                        let mut best = xd[best_idx];
                        for ky in 0..kernel {
                            for kx in 0..kernel {
                                let xi =
                                    ((b * c + ch) * h + oy * stride + ky) * w + ox * stride + kx;
                                if xd[xi] > best {
                                    best = xd[xi];
                                    best_idx = xi;
                                }
                            }
                        }
                        let oi = ((b * c + ch) * oh + oy) * ow + ox;
                        out[oi] = best;
                        argmax[oi] = best_idx;
                    }
                }
            }
        }
        drop(xd);

        let in_len = n * c * h * w;
        Ok(self.push(&[x], out, &[n, c, oh, ow], move |g| {
            let mut dx = vec![S::ZERO; in_len];
            for (gi, &src) in g.iter().zip(argmax.iter()) {
                dx[src] += *gi;
            }
            vec![Some(dx)]
        }))
    }

    /// Mean over each channel map: `[N,C,H,W] -> [N,C]`.
    pub fn global_avg_pool(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let [n, c, h, w] = want_4d("global_avg_pool", x)?;
        let plane = h * w;
        let inv = S::ONE / S::from_usize(plane);
        let xd = x.data();
        let mut out = vec![S::ZERO; n * c];
        for (i, o) in out.iter_mut().enumerate() {
            let base = i * plane;
            let mut acc = S::ZERO;
            for v in &xd[base..base + plane] {
                acc += *v;
            }
            *o = acc * inv;
        }
        drop(xd);
        Ok(self.push(&[x], out, &[n, c], move |g| {
            let mut dx = vec![S::ZERO; n * c * plane];
            for (i, gi) in g.iter().enumerate() {
                let gv = *gi * inv;
                for v in &mut dx[i * plane..(i + 1) * plane] {
                    *v = gv;
                }
            }
            vec![Some(dx)]
        }))
    }
}
