//! Training-time image augmentation: random horizontal flip, zero-pad random
//! crop, then per-channel standardization. Each sample gets its own rng
//! stream so batch assembly order never changes the result.

use serde::{Deserialize, Serialize};

use crate::backbone::InputShape;
use crate::error::{Error, Result};
use crate::rng::Rng;

use super::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

/// Per-channel mean and standard deviation over a (training) split.
pub fn compute_channel_stats(ds: &Dataset) -> ChannelStats {
    let (channels, plane) = match ds.shape() {
        InputShape::Image { channels, height, width } => (channels, height * width),
        InputShape::Flat { dim } => (1, dim),
    };
    let mut mean = vec![0.0f64; channels];
    let mut count = vec![0usize; channels];
    for i in 0..ds.len() {
        for (j, v) in ds.sample(i).iter().enumerate() {
            let c = (j / plane) % channels;
            mean[c] += *v as f64;
            count[c] += 1;
        }
    }
    for c in 0..channels {
        mean[c] /= count[c] as f64;
    }
    let mut var = vec![0.0f64; channels];
    for i in 0..ds.len() {
        for (j, v) in ds.sample(i).iter().enumerate() {
            let c = (j / plane) % channels;
            let d = *v as f64 - mean[c];
            var[c] += d * d;
        }
    }
    let std: Vec<f32> = var
        .iter()
        .zip(&count)
        .map(|(v, n)| ((v / *n as f64).sqrt().max(1e-8)) as f32)
        .collect();
    ChannelStats { mean: mean.iter().map(|m| *m as f32).collect(), std }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub hflip: bool,
    pub crop_size: (usize, usize),
    pub crop_padding: usize,
    #[serde(default)]
    pub normalize: Option<ChannelStats>,
}

impl AugmentSpec {
    /// Flip + pad-crop at the image's own size, no normalization yet.
    pub fn standard(height: usize, width: usize, padding: usize) -> Self {
        AugmentSpec { hflip: true, crop_size: (height, width), crop_padding: padding, normalize: None }
    }

    pub fn with_stats(mut self, stats: ChannelStats) -> Self {
        self.normalize = Some(stats);
        self
    }

    /// The matching test-time transform: no flip, no padding, full-size crop,
    /// same normalization.
    pub fn eval_transform(&self) -> AugmentSpec {
        AugmentSpec {
            hflip: false,
            crop_size: self.crop_size,
            crop_padding: 0,
            normalize: self.normalize.clone(),
        }
    }

    pub fn validate(&self, shape: InputShape) -> Result<()> {
        match shape {
            InputShape::Flat { .. } => Err(Error::InvalidConfig(
                "augmentation applies to image datasets only".into(),
            )),
            InputShape::Image { height, width, .. } => {
                let (ch, cw) = self.crop_size;
                if ch == 0 || cw == 0 || ch > height + 2 * self.crop_padding || cw > width + 2 * self.crop_padding {
                    return Err(Error::InvalidConfig(format!(
                        "crop {ch}x{cw} does not fit padded {}x{}",
                        height + 2 * self.crop_padding,
                        width + 2 * self.crop_padding
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Apply the transform to one CHW image. Output is `C x crop_h x crop_w`.
pub fn augment(
    image: &[f32],
    channels: usize,
    height: usize,
    width: usize,
    spec: &AugmentSpec,
    rng: &mut Rng,
) -> Vec<f32> {
    debug_assert_eq!(image.len(), channels * height * width);
    let flip = spec.hflip && rng.coin();
    let p = spec.crop_padding;
    let (ch, cw) = spec.crop_size;
    let (ph, pw) = (height + 2 * p, width + 2 * p);
    let dy = if ph > ch { rng.below(ph - ch + 1) } else { 0 };
    let dx = if pw > cw { rng.below(pw - cw + 1) } else { 0 };

    let mut out = vec![0.0f32; channels * ch * cw];
    for c in 0..channels {
        for oy in 0..ch {
            for ox in 0..cw {
                // Position in the padded frame, then back into the source.
                let sy = (oy + dy) as isize - p as isize;
                let sx = (ox + dx) as isize - p as isize;
                let v = if sy < 0 || sy >= height as isize || sx < 0 || sx >= width as isize {
                    0.0
                } else {
                    let sx = if flip { width - 1 - sx as usize } else { sx as usize };
                    image[(c * height + sy as usize) * width + sx]
                };
                out[(c * ch + oy) * cw + ox] = v;
            }
        }
    }
    if let Some(stats) = &spec.normalize {
        for c in 0..channels {
            let (m, s) = (stats.mean[c], stats.std[c]);
            for v in &mut out[c * ch * cw..(c + 1) * ch * cw] {
                *v = (*v - m) / s;
            }
        }
    }
    out
}
