//! Dataset ingestion, synthetic generators, augmentation and predefined
//! splits.

mod augment;
mod io;
mod splits;
mod synthetic;

pub use augment::{augment, compute_channel_stats, AugmentSpec, ChannelStats};
pub use io::{load_image_dataset, save_dataset_binary, save_dataset_dir, DatasetFormat};
pub use splits::{
    make_initial_splits, read_index_list, stratified_split, write_index_list, SplitSchedule,
};
pub use synthetic::{make_synthetic, SyntheticKind, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::backbone::InputShape;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Test,
}

/// Immutable labeled sample store. Pixels (or coordinates) are `f32`,
/// row-major; labels live in `[0, class_count)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f32>,
    shape: InputShape,
    labels: Vec<usize>,
    class_count: usize,
    split: SplitTag,
}

impl Dataset {
    pub fn new(
        values: Vec<f32>,
        shape: InputShape,
        labels: Vec<usize>,
        class_count: usize,
        split: SplitTag,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset("dataset requires at least one sample"));
        }
        let per_sample = shape.flat_dim();
        if values.len() != labels.len() * per_sample {
            return Err(Error::InvalidConfig(format!(
                "{} values do not tile {} samples of {} scalars",
                values.len(),
                labels.len(),
                per_sample
            )));
        }
        if let Some(&bad) = labels.iter().find(|l| **l >= class_count) {
            return Err(Error::LabelOutOfRange { label: bad, classes: class_count });
        }
        Ok(Dataset { values, shape, labels, class_count, split })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn shape(&self) -> InputShape {
        self.shape
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    pub fn sample_dim(&self) -> usize {
        self.shape.flat_dim()
    }

    pub fn sample(&self, idx: usize) -> &[f32] {
        let d = self.sample_dim();
        &self.values[idx * d..(idx + 1) * d]
    }

    pub fn label(&self, idx: usize) -> usize {
        self.labels[idx]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Tensor shape of a batch of `n` samples.
    pub fn batch_shape(&self, n: usize) -> Vec<usize> {
        match self.shape {
            InputShape::Flat { dim } => vec![n, dim],
            InputShape::Image { channels, height, width } => vec![n, channels, height, width],
        }
    }

    /// Assemble a raw (untransformed) batch.
    pub fn batch<S: Scalar>(&self, indices: &[usize]) -> (Tensor<S>, Vec<usize>) {
        let d = self.sample_dim();
        let mut values = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend(self.sample(i).iter().map(|v| S::from_f64(*v as f64)));
            labels.push(self.label(i));
        }
        (Tensor::from_vec(values, &self.batch_shape(indices.len())), labels)
    }

    /// Assemble a batch with a per-sample transform applied to the raw values.
    pub fn batch_with<S: Scalar>(
        &self,
        indices: &[usize],
        mut transform: impl FnMut(usize, &[f32]) -> Vec<f32>,
    ) -> (Tensor<S>, Vec<usize>) {
        let d = self.sample_dim();
        let mut values = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let transformed = transform(i, self.sample(i));
            debug_assert_eq!(transformed.len(), d);
            values.extend(transformed.iter().map(|v| S::from_f64(*v as f64)));
            labels.push(self.label(i));
        }
        (Tensor::from_vec(values, &self.batch_shape(indices.len())), labels)
    }
}
