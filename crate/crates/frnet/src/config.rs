//! Declarative experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::active::{ALConfig, ScoreHead, Strategy};
use crate::backbone::{BackboneConfig, InputShape};
use crate::data::{
    compute_channel_stats, load_image_dataset, make_synthetic, AugmentSpec, ChannelStats, Dataset,
    DatasetFormat, SyntheticKind, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::hash::fnv1a64_hex;
use crate::model::ModelConfig;
use crate::optim::OptimizerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub noise: f64,
    pub seed: u64,
    #[serde(default)]
    pub image_size: Option<usize>,
    #[serde(default)]
    pub embed_dim: Option<usize>,
    #[serde(default)]
    pub embed_noise: f64,
}

impl SyntheticTask {
    fn spec(&self, kind: SyntheticKind) -> SyntheticSpec {
        SyntheticSpec {
            kind,
            classes: self.classes,
            train_per_class: self.train_per_class,
            test_per_class: self.test_per_class,
            noise: self.noise,
            seed: self.seed,
            image_size: self.image_size,
            embed_dim: self.embed_dim,
            embed_noise: self.embed_noise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    Binary,
    Dir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    Blobs(SyntheticTask),
    Rings(SyntheticTask),
    File { train: PathBuf, test: PathBuf, format: FileFormat },
}

impl DatasetConfig {
    /// Materialize the train/test pair (plus any stored channel statistics).
    pub fn load(&self) -> Result<(Dataset, Dataset, Option<ChannelStats>)> {
        match self {
            DatasetConfig::Blobs(task) => {
                let (train, test) = make_synthetic(&task.spec(SyntheticKind::Blobs))?;
                Ok((train, test, None))
            }
            DatasetConfig::Rings(task) => {
                let (train, test) = make_synthetic(&task.spec(SyntheticKind::Rings))?;
                Ok((train, test, None))
            }
            DatasetConfig::File { train, test, format } => {
                let fmt = match format {
                    FileFormat::Binary => DatasetFormat::Binary,
                    FileFormat::Dir => DatasetFormat::Dir,
                };
                let (train_ds, stats) = load_image_dataset(train, fmt)?;
                let (test_ds, _) = load_image_dataset(test, fmt)?;
                if train_ds.class_count() != test_ds.class_count() {
                    return Err(Error::InvalidConfig(format!(
                        "train has {} classes, test has {}",
                        train_ds.class_count(),
                        test_ds.class_count()
                    )));
                }
                Ok((train_ds, test_ds, stats))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    /// `baseline`, `fr_ojkd`, `fr_no_gate`, `fr_reduce_only`,
    /// `fr_square_linear`, `fr_no_layernorm` or `fr_k<k>`.
    pub variant: String,
    pub d_frf: usize,
    #[serde(default)]
    pub double_relu: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSection {
    pub initial_pool_size: usize,
    pub budget_per_cycle: usize,
    pub num_cycles: usize,
    pub strategy: Strategy,
    #[serde(default)]
    pub score_head: ScoreHead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSection {
    #[serde(default)]
    pub hflip: bool,
    /// Crop height/width; defaults to the image size.
    #[serde(default)]
    pub crop: Option<(usize, usize)>,
    #[serde(default)]
    pub crop_padding: usize,
    /// Standardize with per-channel statistics computed from the training
    /// split (or taken from the dataset manifest when present).
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub dataset: DatasetConfig,
    pub backbone: BackboneConfig,
    pub head: HeadConfig,
    pub optim: OptimizerConfig,
    #[serde(default)]
    pub active: Option<ActiveSection>,
    #[serde(default)]
    pub augment: Option<AugmentSection>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    /// Canonical serialized form; the config hash is derived from this.
    pub fn canonical_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(format!("not serializable: {e}")))
    }

    pub fn config_hash(&self) -> Result<String> {
        Ok(fnv1a64_hex(self.canonical_toml()?.as_bytes()))
    }

    pub fn model_config(&self, num_classes: usize) -> ModelConfig {
        ModelConfig {
            backbone: self.backbone.clone(),
            variant: self.head.variant.clone(),
            d_frf: self.head.d_frf,
            num_classes,
            double_relu: self.head.double_relu,
        }
    }

    /// Build the effective train-time augmentation pipeline, if configured.
    pub fn augment_spec(
        &self,
        train: &Dataset,
        stored_stats: Option<ChannelStats>,
    ) -> Result<Option<AugmentSpec>> {
        let section = match &self.augment {
            Some(s) => s,
            None => return Ok(None),
        };
        let (h, w) = match train.shape() {
            InputShape::Image { height, width, .. } => (height, width),
            InputShape::Flat { .. } => {
                return Err(Error::InvalidConfig(
                    "augmentation configured for a flat-vector dataset".into(),
                ))
            }
        };
        let crop = section.crop.unwrap_or((h, w));
        let mut spec = AugmentSpec {
            hflip: section.hflip,
            crop_size: crop,
            crop_padding: section.crop_padding,
            normalize: None,
        };
        if section.normalize {
            spec.normalize = Some(match stored_stats {
                Some(stats) => stats,
                None => compute_channel_stats(train),
            });
        }
        spec.validate(train.shape())?;
        Ok(Some(spec))
    }

    /// Input geometry the backbone will actually see after transforms.
    fn effective_input(&self, train: &Dataset) -> InputShape {
        match (train.shape(), &self.augment) {
            (InputShape::Image { channels, height, width }, Some(section)) => {
                let (ch, cw) = section.crop.unwrap_or((height, width));
                InputShape::Image { channels, height: ch, width: cw }
            }
            (shape, _) => shape,
        }
    }

    /// Full validation against the materialized training split.
    pub fn validate(&self, train: &Dataset) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidConfig("experiment name must be nonempty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must be nonempty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::InvalidConfig("seeds must be distinct".into()));
        }
        self.optim.validate()?;
        if self.optim.lr0 <= 0.0 {
            return Err(Error::InvalidConfig("lr0 must be positive".into()));
        }
        let model = self.model_config(train.class_count());
        model.parse_variant()?;
        if let Some(fr) = model.fr_config()? {
            fr.validate()?;
        }
        let effective = self.effective_input(train);
        if effective != self.backbone.input {
            return Err(Error::InvalidConfig(format!(
                "backbone expects input {:?} but the dataset (after transforms) provides {:?}",
                self.backbone.input, effective
            )));
        }
        if let Some(active) = &self.active {
            self.al_config(active)?.validate(train.len())?;
        }
        Ok(())
    }

    pub fn al_config(&self, section: &ActiveSection) -> Result<ALConfig> {
        Ok(ALConfig {
            initial_pool_size: section.initial_pool_size,
            budget_per_cycle: section.budget_per_cycle,
            num_cycles: section.num_cycles,
            strategy: section.strategy,
            seeds: self.seeds.clone(),
            score_head: section.score_head,
        })
    }
}
