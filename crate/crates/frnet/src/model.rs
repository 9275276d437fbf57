//! The dual-head network: a shared backbone feeding a gradient-gated linear
//! classification head (the one kept at inference) and a feature-refiner
//! teacher head used only during training.
//!
//! Joint training optimizes the unweighted sum of the two heads' losses.
//! With the gate enabled, the gated head's gradient stops at the gate, so the
//! backbone is shaped exclusively by the refiner head while the original head
//! keeps adapting to whatever features the backbone produces. At inference
//! the refiner head is dropped and the architecture is exactly the baseline.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor};
use crate::backbone::{build_backbone, Backbone, BackboneConfig};
use crate::error::{Error, Result};
use crate::nn::{count_trainable, InitSpec, Linear, Mode, NamedTensor};
use crate::refiner::{build_feature_refiner, FeatureRefinerConfig, FeatureRefinerHead, FrVariant};
use crate::scalar::Scalar;

/// Head arrangement, as named on the command line and in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelVariant {
    /// Backbone + linear head only; the comparison network.
    Baseline,
    /// Dual head with a feature-refiner variant; `gate` controls whether the
    /// original head's gradient is blocked from the backbone.
    DualHead { fr: FrVariant, gate: bool },
}

impl ModelVariant {
    /// Parse a variant name: `baseline`, `fr_ojkd`, `fr_no_gate`,
    /// `fr_reduce_only`, `fr_square_linear`, `fr_no_layernorm`, `fr_k<k>`.
    pub fn parse(name: &str) -> Result<Self> {
        let v = match name {
            "baseline" => ModelVariant::Baseline,
            "fr_ojkd" => ModelVariant::DualHead { fr: FrVariant::Full, gate: true },
            "fr_no_gate" => ModelVariant::DualHead { fr: FrVariant::Full, gate: false },
            "fr_reduce_only" => {
                ModelVariant::DualHead { fr: FrVariant::ReduceOnly, gate: true }
            }
            "fr_square_linear" => {
                ModelVariant::DualHead { fr: FrVariant::SquareLinearOnly, gate: true }
            }
            "fr_no_layernorm" => {
                ModelVariant::DualHead { fr: FrVariant::NoLayerNorm, gate: true }
            }
            _ => {
                if let Some(k) = name.strip_prefix("fr_k") {
                    let k: usize = k.parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad variant name: {name}"))
                    })?;
                    ModelVariant::DualHead { fr: FrVariant::KNonlinearLayers(k), gate: true }
                } else {
                    return Err(Error::InvalidConfig(format!("unknown variant: {name}")));
                }
            }
        };
        Ok(v)
    }

    pub fn name(&self) -> String {
        match self {
            ModelVariant::Baseline => "baseline".into(),
            ModelVariant::DualHead { fr, gate } => match (fr, gate) {
                (FrVariant::Full, true) => "fr_ojkd".into(),
                (FrVariant::Full, false) => "fr_no_gate".into(),
                (FrVariant::ReduceOnly, _) => "fr_reduce_only".into(),
                (FrVariant::SquareLinearOnly, _) => "fr_square_linear".into(),
                (FrVariant::NoLayerNorm, _) => "fr_no_layernorm".into(),
                (FrVariant::KNonlinearLayers(k), _) => format!("fr_k{k}"),
            },
        }
    }

    pub fn has_fr_head(&self) -> bool {
        matches!(self, ModelVariant::DualHead { .. })
    }
}

/// Everything needed to rebuild a network: backbone geometry, head variant,
/// reduced dimension and class count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub backbone: BackboneConfig,
    pub variant: String,
    pub d_frf: usize,
    pub num_classes: usize,
    #[serde(default)]
    pub double_relu: bool,
}

impl ModelConfig {
    pub fn parse_variant(&self) -> Result<ModelVariant> {
        ModelVariant::parse(&self.variant)
    }

    pub fn fr_config(&self) -> Result<Option<FeatureRefinerConfig>> {
        match self.parse_variant()? {
            ModelVariant::Baseline => Ok(None),
            ModelVariant::DualHead { fr, .. } => Ok(Some(FeatureRefinerConfig {
                d_bbf: self.backbone.d_bbf,
                d_frf: self.d_frf,
                num_classes: self.num_classes,
                variant: fr,
                double_relu: self.double_relu,
            })),
        }
    }
}

pub struct DualHeadNetwork<S: Scalar> {
    pub backbone: Backbone<S>,
    pub original_head: Linear<S>,
    pub fr_head: Option<FeatureRefinerHead<S>>,
    gate_enabled: bool,
    num_classes: usize,
}

/// Build a network from a model config; same `init` seed, same weights.
pub fn build_network<S: Scalar>(config: &ModelConfig, init: &InitSpec) -> Result<DualHeadNetwork<S>> {
    let variant = config.parse_variant()?;
    let backbone = build_backbone(&config.backbone, init)?;
    // Heads draw from distinct substreams so that adding or removing the FR
    // head cannot shift the original head's initialization.
    let head_init = InitSpec { scheme: init.scheme, seed: crate::rng::substream(init.seed, 1) };
    let mut head_rng = head_init.rng();
    let original_head = Linear::new(config.backbone.d_bbf, config.num_classes, init.scheme, &mut head_rng);
    let fr_head = match config.fr_config()? {
        Some(fr_cfg) => {
            let fr_init = InitSpec { scheme: init.scheme, seed: crate::rng::substream(init.seed, 2) };
            Some(build_feature_refiner(&fr_cfg, &fr_init)?)
        }
        None => None,
    };
    let gate_enabled = matches!(variant, ModelVariant::DualHead { gate: true, .. });
    Ok(DualHeadNetwork {
        backbone,
        original_head,
        fr_head,
        gate_enabled,
        num_classes: config.num_classes,
    })
}

impl<S: Scalar> DualHeadNetwork<S> {
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn gate_enabled(&self) -> bool {
        self.gate_enabled
    }

    /// Toggle the gradient gate. Forward values are unaffected; only the
    /// backward path changes.
    pub fn set_gate(&mut self, enabled: bool) {
        self.gate_enabled = enabled;
    }

    /// Training forward: both heads read the same backbone features from one
    /// backbone pass. Returns `(logits_original, logits_fr)`.
    pub fn forward_train(
        &self,
        tape: &Tape<S>,
        x: &Tensor<S>,
        mode: Mode,
    ) -> Result<(Tensor<S>, Option<Tensor<S>>)> {
        let features = self.backbone.forward(tape, x, mode)?;
        let original_in = if self.gate_enabled && self.fr_head.is_some() {
            tape.gradient_gate(&features)?
        } else {
            features.clone()
        };
        let logits_original = self.original_head.forward(tape, &original_in)?;
        let logits_fr = match &self.fr_head {
            Some(fr) => Some(fr.forward(tape, &features)?),
            None => None,
        };
        Ok((logits_original, logits_fr))
    }

    /// Inference forward: backbone and original head only, eval mode, no
    /// recording. The refiner head is never touched.
    pub fn forward_infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let tape = Tape::inference();
        let features = self.backbone.forward(&tape, x, Mode::Eval)?;
        self.original_head.forward(&tape, &features)
    }

    /// Eval-mode logits from the refiner head, for dual-head evaluation.
    pub fn forward_fr_eval(&self, x: &Tensor<S>) -> Result<Option<Tensor<S>>> {
        let fr = match &self.fr_head {
            Some(fr) => fr,
            None => return Ok(None),
        };
        let tape = Tape::inference();
        let features = self.backbone.forward(&tape, x, Mode::Eval)?;
        Ok(Some(fr.forward(&tape, &features)?))
    }

    pub fn named_tensors(&self) -> Vec<NamedTensor<S>> {
        let mut out = Vec::new();
        self.backbone.append_params("backbone", &mut out);
        self.original_head.append_params("original_head", &mut out);
        if let Some(fr) = &self.fr_head {
            fr.append_params("fr_head", &mut out);
        }
        out
    }

    /// Trainable tensors in a stable order, for the optimizer.
    pub fn trainable_params(&self) -> Vec<Tensor<S>> {
        self.named_tensors().into_iter().filter(|t| t.trainable).map(|t| t.tensor).collect()
    }

    pub fn zero_grads(&self) {
        for p in self.trainable_params() {
            p.zero_grad();
        }
    }

    /// Trainable scalars in the full training graph.
    pub fn train_param_count(&self) -> usize {
        count_trainable(&self.named_tensors())
    }

    /// Trainable scalars in the deployed graph: backbone + original head.
    /// The refiner head is excluded entirely.
    pub fn inference_param_count(&self) -> usize {
        let mut out = Vec::new();
        self.backbone.append_params("backbone", &mut out);
        self.original_head.append_params("original_head", &mut out);
        count_trainable(&out)
    }
}

/// Joint loss: unweighted sum of the two heads' cross-entropies (or the
/// plain cross-entropy when no refiner head is attached).
pub fn ojkd_loss<S: Scalar>(
    tape: &Tape<S>,
    logits_original: &Tensor<S>,
    logits_fr: Option<&Tensor<S>>,
    labels: &[usize],
) -> Result<Tensor<S>> {
    let ce_original = tape.softmax_cross_entropy(logits_original, labels)?;
    match logits_fr {
        Some(fr) => {
            let ce_fr = tape.softmax_cross_entropy(fr, labels)?;
            tape.add(&ce_original, &ce_fr)
        }
        None => Ok(ce_original),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::BackboneConfig;

    fn toy_config(variant: &str) -> ModelConfig {
        ModelConfig {
            backbone: BackboneConfig::mlp(4, vec![8], 6),
            variant: variant.into(),
            d_frf: 3,
            num_classes: 5,
            double_relu: false,
        }
    }

    fn batch(n: usize) -> Tensor<f64> {
        Tensor::from_vec((0..n * 4).map(|i| (i as f64 * 0.37).sin()).collect(), &[n, 4])
    }

    #[test]
    fn variant_names_round_trip() {
        for name in [
            "baseline",
            "fr_ojkd",
            "fr_no_gate",
            "fr_reduce_only",
            "fr_square_linear",
            "fr_no_layernorm",
            "fr_k3",
        ] {
            assert_eq!(ModelVariant::parse(name).unwrap().name(), name);
        }
        assert!(ModelVariant::parse("bogus").is_err());
    }

    #[test]
    fn zero_weight_heads_give_zero_logits() {
        let net: DualHeadNetwork<f64> =
            build_network(&toy_config("fr_ojkd"), &InitSpec::kaiming(3)).unwrap();
        net.original_head.weight.update_data(|d| d.iter_mut().for_each(|v| *v = 0.0));
        let fr = net.fr_head.as_ref().unwrap();
        fr.classifier.weight.update_data(|d| d.iter_mut().for_each(|v| *v = 0.0));
        fr.classifier.bias.update_data(|d| d.iter_mut().for_each(|v| *v = 0.0));
        let tape = Tape::new();
        let (lo, lf) = net.forward_train(&tape, &batch(3), Mode::Train).unwrap();
        assert!(lo.to_vec().iter().all(|v| *v == 0.0));
        assert!(lf.unwrap().to_vec().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gate_toggle_does_not_change_forward_logits() {
        let mut net: DualHeadNetwork<f64> =
            build_network(&toy_config("fr_ojkd"), &InitSpec::kaiming(4)).unwrap();
        let x = batch(4);
        let tape = Tape::new();
        let (on_orig, on_fr) = net.forward_train(&tape, &x, Mode::Train).unwrap();
        net.set_gate(false);
        let tape = Tape::new();
        let (off_orig, off_fr) = net.forward_train(&tape, &x, Mode::Train).unwrap();
        assert!(on_orig.bit_eq(&off_orig));
        assert!(on_fr.unwrap().bit_eq(&off_fr.unwrap()));
    }

    #[test]
    fn gate_blocks_backbone_gradient_from_original_head() {
        // With the gate on, backbone gradients from the joint loss must equal
        // the gradients from the FR-head loss alone, exactly.
        let cfg = toy_config("fr_ojkd");
        let x = batch(4);
        let labels = [0usize, 2, 4, 1];

        let joint = {
            let net: DualHeadNetwork<f64> = build_network(&cfg, &InitSpec::kaiming(7)).unwrap();
            let tape = Tape::new();
            let (lo, lf) = net.forward_train(&tape, &x, Mode::Train).unwrap();
            let loss = ojkd_loss(&tape, &lo, lf.as_ref(), &labels).unwrap();
            tape.backward(&loss).unwrap();
            let mut grads = Vec::new();
            net.backbone.append_params("bb", &mut grads);
            grads.into_iter().map(|t| t.tensor.grad().unwrap_or_default()).collect::<Vec<_>>()
        };

        let fr_only = {
            let net: DualHeadNetwork<f64> = build_network(&cfg, &InitSpec::kaiming(7)).unwrap();
            let tape = Tape::new();
            let (_lo, lf) = net.forward_train(&tape, &x, Mode::Train).unwrap();
            let loss = tape.softmax_cross_entropy(&lf.unwrap(), &labels).unwrap();
            tape.backward(&loss).unwrap();
            let mut grads = Vec::new();
            net.backbone.append_params("bb", &mut grads);
            grads.into_iter().map(|t| t.tensor.grad().unwrap_or_default()).collect::<Vec<_>>()
        };

        assert_eq!(joint.len(), fr_only.len());
        for (a, b) in joint.iter().zip(&fr_only) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn original_head_still_learns_through_gate() {
        let net: DualHeadNetwork<f64> =
            build_network(&toy_config("fr_ojkd"), &InitSpec::kaiming(8)).unwrap();
        let tape = Tape::new();
        let (lo, lf) = net.forward_train(&tape, &batch(4), Mode::Train).unwrap();
        let loss = ojkd_loss(&tape, &lo, lf.as_ref(), &[0, 1, 2, 3]).unwrap();
        tape.backward(&loss).unwrap();
        let head_grad = net.original_head.weight.grad().unwrap();
        assert!(head_grad.iter().any(|v| *v != 0.0), "original head got no gradient");
    }

    #[test]
    fn infer_matches_train_original_branch_in_eval_mode() {
        let net: DualHeadNetwork<f32> =
            build_network(&toy_config("fr_ojkd"), &InitSpec::kaiming(9)).unwrap();
        let x = Tensor::from_vec((0..5 * 4).map(|i| (i as f32 * 0.13).cos()).collect(), &[5, 4]);
        let infer = net.forward_infer(&x).unwrap();
        let tape = Tape::new();
        let (train_orig, _) = net.forward_train(&tape, &x, Mode::Eval).unwrap();
        assert!(infer.bit_eq(&train_orig));
    }

    #[test]
    fn inference_param_count_excludes_fr_head() {
        let net: DualHeadNetwork<f32> =
            build_network(&toy_config("fr_ojkd"), &InitSpec::kaiming(10)).unwrap();
        let fr_cfg = toy_config("fr_ojkd").fr_config().unwrap().unwrap();
        assert_eq!(
            net.train_param_count() - net.inference_param_count(),
            fr_cfg.expected_param_count()
        );

        let baseline: DualHeadNetwork<f32> =
            build_network(&toy_config("baseline"), &InitSpec::kaiming(10)).unwrap();
        assert_eq!(baseline.train_param_count(), net.inference_param_count());
    }

    #[test]
    fn uniform_heads_sum_to_two_ln_c() {
        let tape = Tape::new();
        let lo = Tensor::from_vec(vec![0.0f64; 2 * 10], &[2, 10]);
        let lf = Tensor::from_vec(vec![0.0f64; 2 * 10], &[2, 10]);
        let loss = ojkd_loss(&tape, &lo, Some(&lf), &[1, 2]).unwrap();
        assert!((loss.to_vec()[0] - 2.0 * 10.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn identical_logits_double_the_single_head_loss() {
        let tape = Tape::new();
        let data: Vec<f64> = vec![0.3, -0.8, 1.2, 0.5, 0.9, -1.4];
        let lo = Tensor::from_vec(data.clone(), &[2, 3]);
        let lf = Tensor::from_vec(data, &[2, 3]);
        let labels = [2usize, 0];
        let joint = ojkd_loss(&tape, &lo, Some(&lf), &labels).unwrap();
        let single = tape.softmax_cross_entropy(&lo, &labels).unwrap();
        assert!((joint.to_vec()[0] - 2.0 * single.to_vec()[0]).abs() < 1e-12);
    }
}
