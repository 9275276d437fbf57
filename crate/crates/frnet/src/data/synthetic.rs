//! Reproducible synthetic classification tasks, as point clouds or rendered
//! single-channel images. Stand-ins for real image corpora in tests and
//! examples.

use serde::{Deserialize, Serialize};

use crate::backbone::InputShape;
use crate::error::{Error, Result};
use crate::rng::Rng;

use super::{Dataset, SplitTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Gaussian clusters centered on a circle; linearly separable at zero
    /// noise.
    Blobs,
    /// Concentric rings, one radius per class; not linearly separable in the
    /// raw coordinates.
    Rings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub noise: f64,
    pub seed: u64,
    /// `None` emits flat 2-D coordinates; `Some(r)` renders each point as an
    /// `r x r` single-channel intensity bump.
    #[serde(default)]
    pub image_size: Option<usize>,
    /// Embed the 2-D points into this many dimensions through a fixed
    /// seed-derived orthonormal map, hiding the class structure in a
    /// subspace. Requires flat output.
    #[serde(default)]
    pub embed_dim: Option<usize>,
    /// Isotropic ambient noise added after embedding.
    #[serde(default)]
    pub embed_noise: f64,
}

/// Extent of the point cloud; rendering maps `[-EXTENT, EXTENT]^2` onto the
/// pixel grid.
const EXTENT: f64 = 3.0;

fn point(kind: SyntheticKind, class: usize, classes: usize, noise: f64, rng: &mut Rng) -> (f64, f64) {
    match kind {
        SyntheticKind::Blobs => {
            let angle = std::f64::consts::TAU * class as f64 / classes as f64;
            let (cx, cy) = (2.0 * angle.cos(), 2.0 * angle.sin());
            (cx + noise * rng.gauss(), cy + noise * rng.gauss())
        }
        SyntheticKind::Rings => {
            let radius = 0.7 + 1.6 * class as f64 / classes.max(1) as f64;
            let angle = std::f64::consts::TAU * rng.next_f64();
            let r = radius + noise * rng.gauss();
            (r * angle.cos(), r * angle.sin())
        }
    }
}

fn render(x: f64, y: f64, size: usize) -> Vec<f32> {
    let mut img = vec![0.0f32; size * size];
    let to_pix = |v: f64| (v + EXTENT) / (2.0 * EXTENT) * (size as f64 - 1.0);
    let (cx, cy) = (to_pix(x), to_pix(y));
    let sigma = size as f64 / 8.0;
    for py in 0..size {
        for px in 0..size {
            let dx = px as f64 - cx;
            let dy = py as f64 - cy;
            let v = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            img[py * size + px] = v as f32;
        }
    }
    img
}

/// Two orthonormal columns in `dim` dimensions, fixed by the seed
/// (Gram-Schmidt on gaussian draws).
fn embedding_basis(dim: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = Rng::derived(seed, 0xe3bd_0001);
    let mut u: Vec<f64> = (0..dim).map(|_| rng.gauss()).collect();
    let norm_u = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.iter_mut().for_each(|v| *v /= norm_u);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gauss()).collect();
    let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    for (vi, ui) in v.iter_mut().zip(&u) {
        *vi -= dot * ui;
    }
    let norm_v = v.iter().map(|val| val * val).sum::<f64>().sqrt();
    v.iter_mut().for_each(|val| *val /= norm_v);
    (u, v)
}

fn generate(spec: &SyntheticSpec, per_class: usize, rng: &mut Rng, split: SplitTag) -> Result<Dataset> {
    let shape = match (spec.image_size, spec.embed_dim) {
        (None, None) => InputShape::Flat { dim: 2 },
        (None, Some(d)) => InputShape::Flat { dim: d },
        (Some(r), None) => InputShape::Image { channels: 1, height: r, width: r },
        (Some(_), Some(_)) => {
            return Err(Error::InvalidConfig(
                "image_size and embed_dim are mutually exclusive".into(),
            ))
        }
    };
    let basis = spec.embed_dim.map(|d| embedding_basis(d, spec.seed));
    let dim = shape.flat_dim();
    let mut values = Vec::with_capacity(per_class * spec.classes * dim);
    let mut labels = Vec::with_capacity(per_class * spec.classes);
    // Round-robin over classes keeps any prefix of the dataset balanced.
    for _ in 0..per_class {
        for class in 0..spec.classes {
            let (x, y) = point(spec.kind, class, spec.classes, spec.noise, rng);
            match (&basis, spec.image_size) {
                (Some((u, v)), _) => {
                    for (ui, vi) in u.iter().zip(v) {
                        let ambient = spec.embed_noise * rng.gauss();
                        values.push((x * ui + y * vi + ambient) as f32);
                    }
                }
                (None, None) => {
                    values.push(x as f32);
                    values.push(y as f32);
                }
                (None, Some(r)) => values.extend(render(x, y, r)),
            }
            labels.push(class);
        }
    }
    Dataset::new(values, shape, labels, spec.classes, split)
}

/// Build a stratified train/test pair. Pure function of the spec.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, Dataset)> {
    if spec.classes == 0 || spec.train_per_class == 0 || spec.test_per_class == 0 {
        return Err(Error::InvalidConfig("classes and per-class counts must be positive".into()));
    }
    if spec.noise < 0.0 {
        return Err(Error::InvalidConfig("noise must be nonnegative".into()));
    }
    if let Some(r) = spec.image_size {
        if r < 2 {
            return Err(Error::InvalidConfig("image_size must be at least 2".into()));
        }
    }
    if let Some(d) = spec.embed_dim {
        if d < 2 {
            return Err(Error::InvalidConfig("embed_dim must be at least 2".into()));
        }
    }
    if spec.embed_noise < 0.0 {
        return Err(Error::InvalidConfig("embed_noise must be nonnegative".into()));
    }
    let mut train_rng = Rng::derived(spec.seed, 0xda7a_0001);
    let mut test_rng = Rng::derived(spec.seed, 0xda7a_0002);
    let train = generate(spec, spec.train_per_class, &mut train_rng, SplitTag::Train)?;
    let test = generate(spec, spec.test_per_class, &mut test_rng, SplitTag::Test)?;
    Ok((train, test))
}
