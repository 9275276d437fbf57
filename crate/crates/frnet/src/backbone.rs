//! Feature extractors producing a flat `(batch, d_bbf)` feature vector.
//!
//! Three desk-scale families: a plain MLP for point-cloud tasks, a small
//! conv/pool stack, and a tiny residual network with identity shortcuts and
//! batch normalization. The refiner and distillation machinery only ever see
//! the flat feature interface, so anything producing `(batch, d_bbf)` plugs
//! in.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::nn::{BatchNorm2d, Conv2d, InitSpec, Linear, Mode, NamedTensor};
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackboneKind {
    Mlp,
    MiniConv,
    ResnetTiny,
}

/// Input geometry: flat vectors for MLPs, CHW images for conv backbones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputShape {
    Flat { dim: usize },
    Image { channels: usize, height: usize, width: usize },
}

impl InputShape {
    pub fn flat_dim(&self) -> usize {
        match self {
            InputShape::Flat { dim } => *dim,
            InputShape::Image { channels, height, width } => channels * height * width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub kind: BackboneKind,
    pub input: InputShape,
    pub stage_widths: Vec<usize>,
    pub d_bbf: usize,
}

impl BackboneConfig {
    pub fn mlp(input_dim: usize, widths: Vec<usize>, d_bbf: usize) -> Self {
        BackboneConfig {
            kind: BackboneKind::Mlp,
            input: InputShape::Flat { dim: input_dim },
            stage_widths: widths,
            d_bbf,
        }
    }

    pub fn mini_conv(channels: usize, height: usize, width: usize, widths: Vec<usize>) -> Self {
        let d_bbf = *widths.last().unwrap_or(&0);
        BackboneConfig {
            kind: BackboneKind::MiniConv,
            input: InputShape::Image { channels, height, width },
            stage_widths: widths,
            d_bbf,
        }
    }

    pub fn resnet_tiny(channels: usize, height: usize, width: usize, width_per_stage: usize, blocks: usize) -> Self {
        BackboneConfig {
            kind: BackboneKind::ResnetTiny,
            input: InputShape::Image { channels, height, width },
            stage_widths: vec![width_per_stage; blocks + 1],
            d_bbf: width_per_stage,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d_bbf == 0 {
            return Err(Error::InvalidConfig("d_bbf must be positive".into()));
        }
        match self.kind {
            BackboneKind::Mlp => {
                if !matches!(self.input, InputShape::Flat { .. }) {
                    return Err(Error::InvalidConfig("mlp backbone requires flat input".into()));
                }
                if self.stage_widths.contains(&0) {
                    return Err(Error::InvalidConfig("zero stage width".into()));
                }
            }
            BackboneKind::MiniConv => {
                let (h, w) = match self.input {
                    InputShape::Image { height, width, .. } => (height, width),
                    InputShape::Flat { .. } => {
                        return Err(Error::InvalidConfig("mini_conv requires image input".into()))
                    }
                };
                if self.stage_widths.is_empty() || self.stage_widths.contains(&0) {
                    return Err(Error::InvalidConfig("invalid stage widths".into()));
                }
                if *self.stage_widths.last().unwrap() != self.d_bbf {
                    return Err(Error::InvalidConfig(
                        "mini_conv d_bbf must equal the last stage width".into(),
                    ));
                }
                // Each stage halves the map; it must stay at least 1x1.
                let stages = self.stage_widths.len();
                if (h >> stages) == 0 || (w >> stages) == 0 {
                    return Err(Error::InvalidConfig(format!(
                        "{h}x{w} input too small for {stages} pooling stages"
                    )));
                }
            }
            BackboneKind::ResnetTiny => {
                if !matches!(self.input, InputShape::Image { .. }) {
                    return Err(Error::InvalidConfig("resnet_tiny requires image input".into()));
                }
                if self.stage_widths.len() < 2 {
                    return Err(Error::InvalidConfig(
                        "resnet_tiny needs a stem width plus at least one block".into(),
                    ));
                }
                let w0 = self.stage_widths[0];
                if w0 == 0 || self.stage_widths.iter().any(|w| *w != w0) {
                    return Err(Error::InvalidConfig(
                        "invalid stage widths: identity shortcuts require equal widths".into(),
                    ));
                }
                if w0 != self.d_bbf {
                    return Err(Error::InvalidConfig(
                        "resnet_tiny d_bbf must equal the stage width".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

struct ResBlock<S: Scalar> {
    conv1: Conv2d<S>,
    bn1: BatchNorm2d<S>,
    conv2: Conv2d<S>,
    bn2: BatchNorm2d<S>,
}

impl<S: Scalar> ResBlock<S> {
    fn new(width: usize, scheme: crate::nn::InitScheme, rng: &mut Rng) -> Self {
        ResBlock {
            conv1: Conv2d::new(width, width, 3, 1, 1, scheme, rng),
            bn1: BatchNorm2d::new(width),
            conv2: Conv2d::new(width, width, 3, 1, 1, scheme, rng),
            bn2: BatchNorm2d::new(width),
        }
    }

    /// `relu(x + bn2(conv2(relu(bn1(conv1(x))))))`
    fn forward(&self, tape: &Tape<S>, x: &Tensor<S>, mode: Mode) -> Result<Tensor<S>> {
        let h = self.conv1.forward(tape, x)?;
        let h = self.bn1.forward(tape, &h, mode)?;
        let h = tape.relu(&h)?;
        let h = self.conv2.forward(tape, &h)?;
        let h = self.bn2.forward(tape, &h, mode)?;
        let joined = tape.add(x, &h)?;
        tape.relu(&joined)
    }

    fn append_params(&self, prefix: &str, out: &mut Vec<NamedTensor<S>>) {
        self.conv1.append_params(&format!("{prefix}.conv1"), out);
        self.bn1.append_params(&format!("{prefix}.bn1"), out);
        self.conv2.append_params(&format!("{prefix}.conv2"), out);
        self.bn2.append_params(&format!("{prefix}.bn2"), out);
    }
}

enum Body<S: Scalar> {
    Mlp { layers: Vec<Linear<S>> },
    MiniConv { convs: Vec<Conv2d<S>> },
    ResnetTiny { stem: Conv2d<S>, stem_bn: BatchNorm2d<S>, blocks: Vec<ResBlock<S>> },
}

pub struct Backbone<S: Scalar> {
    config: BackboneConfig,
    body: Body<S>,
}

/// Build a backbone from its configuration; identical `init` gives identical
/// weights.
pub fn build_backbone<S: Scalar>(config: &BackboneConfig, init: &InitSpec) -> Result<Backbone<S>> {
    config.validate()?;
    let mut rng = init.rng();
    let scheme = init.scheme;
    let body = match config.kind {
        BackboneKind::Mlp => {
            let mut dims = vec![config.input.flat_dim()];
            dims.extend_from_slice(&config.stage_widths);
            dims.push(config.d_bbf);
            let layers = dims
                .windows(2)
                .map(|w| Linear::new(w[0], w[1], scheme, &mut rng))
                .collect();
            Body::Mlp { layers }
        }
        BackboneKind::MiniConv => {
            let in_ch = match config.input {
                InputShape::Image { channels, .. } => channels,
                InputShape::Flat { .. } => unreachable!("validated"),
            };
            let mut convs = Vec::with_capacity(config.stage_widths.len());
            let mut prev = in_ch;
            for &w in &config.stage_widths {
                convs.push(Conv2d::new(prev, w, 3, 1, 1, scheme, &mut rng));
                prev = w;
            }
            Body::MiniConv { convs }
        }
        BackboneKind::ResnetTiny => {
            let in_ch = match config.input {
                InputShape::Image { channels, .. } => channels,
                InputShape::Flat { .. } => unreachable!("validated"),
            };
            let width = config.stage_widths[0];
            let stem = Conv2d::new(in_ch, width, 3, 1, 1, scheme, &mut rng);
            let stem_bn = BatchNorm2d::new(width);
            let blocks = (1..config.stage_widths.len())
                .map(|_| ResBlock::new(width, scheme, &mut rng))
                .collect();
            Body::ResnetTiny { stem, stem_bn, blocks }
        }
    };
    Ok(Backbone { config: config.clone(), body })
}

impl<S: Scalar> Backbone<S> {
    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn d_bbf(&self) -> usize {
        self.config.d_bbf
    }

    /// Map an input batch to `(batch, d_bbf)` features.
    pub fn forward(&self, tape: &Tape<S>, x: &Tensor<S>, mode: Mode) -> Result<Tensor<S>> {
        match &self.body {
            Body::Mlp { layers } => {
                let mut h = tape.flatten(x)?;
                for layer in layers {
                    h = layer.forward(tape, &h)?;
                    h = tape.relu(&h)?;
                }
                Ok(h)
            }
            Body::MiniConv { convs } => {
                let mut h = x.clone();
                for conv in convs {
                    h = conv.forward(tape, &h)?;
                    h = tape.relu(&h)?;
                    h = tape.max_pool2d(&h, 2, 2)?;
                }
                tape.global_avg_pool(&h)
            }
            Body::ResnetTiny { stem, stem_bn, blocks } => {
                let h = stem.forward(tape, x)?;
                let h = stem_bn.forward(tape, &h, mode)?;
                let mut h = tape.relu(&h)?;
                for block in blocks {
                    h = block.forward(tape, &h, mode)?;
                }
                tape.global_avg_pool(&h)
            }
        }
    }

    pub fn append_params(&self, prefix: &str, out: &mut Vec<NamedTensor<S>>) {
        match &self.body {
            Body::Mlp { layers } => {
                for (i, layer) in layers.iter().enumerate() {
                    layer.append_params(&format!("{prefix}.fc{i}"), out);
                }
            }
            Body::MiniConv { convs } => {
                for (i, conv) in convs.iter().enumerate() {
                    conv.append_params(&format!("{prefix}.conv{i}"), out);
                }
            }
            Body::ResnetTiny { stem, stem_bn, blocks } => {
                stem.append_params(&format!("{prefix}.stem"), out);
                stem_bn.append_params(&format!("{prefix}.stem_bn"), out);
                for (i, block) in blocks.iter().enumerate() {
                    block.append_params(&format!("{prefix}.block{i}"), out);
                }
            }
        }
    }

    pub fn param_count(&self) -> usize {
        let mut named = Vec::new();
        self.append_params("bb", &mut named);
        crate::nn::count_trainable(&named)
    }
}
