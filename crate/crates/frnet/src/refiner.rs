//! The feature-refiner head: a dimension-reducing linear layer followed by a
//! layer-norm-wrapped symmetric two-layer MLP, then a linear classifier.
//!
//! Full layer order:
//!
//! ```text
//! linear(d_bbf -> d_frf)        (no activation)
//! layer_norm(d_frf)
//! linear(d_frf -> d_frf)
//! relu
//! linear(d_frf -> d_frf)
//! layer_norm(d_frf)
//! linear(d_frf -> C)            (classifier)
//! ```
//!
//! Trainable parameter count for the full head:
//!
//! ```text
//! d_bbf*d_frf + d_frf          (reduction)
//! + 2*(d_frf^2 + d_frf)        (two symmetric linears)
//! + 4*d_frf                    (two layer norms)
//! + d_frf*C + C                (classifier)
//! ```
//!
//! e.g. 42058 for (d_bbf=512, d_frf=64, C=10). Ablation variants drop or
//! reshape pieces of this stack; their counts follow the same arithmetic.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::nn::{InitSpec, LayerNorm, Linear, NamedTensor};
use crate::scalar::Scalar;

/// Head architecture variants. `Full` is `KNonlinearLayers(1)`; the others
/// are build-up and stress ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrVariant {
    /// Reduction + norm-wrapped symmetric MLP + classifier.
    Full,
    /// Full without the two layer norms.
    NoLayerNorm,
    /// Reduction linear straight into the classifier, no activation.
    ReduceOnly,
    /// Square `d_bbf x d_bbf` linear into the classifier, no activation.
    SquareLinearOnly,
    /// `k` linear+relu pairs inside the MLP block; `k = 1` equals `Full`.
    KNonlinearLayers(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRefinerConfig {
    pub d_bbf: usize,
    pub d_frf: usize,
    pub num_classes: usize,
    pub variant: FrVariant,
    /// Adds a second relu after the second symmetric linear (before the final
    /// layer norm). Off by default; parameter counts are unaffected.
    #[serde(default)]
    pub double_relu: bool,
}

impl FeatureRefinerConfig {
    pub fn full(d_bbf: usize, d_frf: usize, num_classes: usize) -> Self {
        FeatureRefinerConfig { d_bbf, d_frf, num_classes, variant: FrVariant::Full, double_relu: false }
    }

    pub fn with_variant(mut self, variant: FrVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_bbf == 0 || self.num_classes == 0 {
            return Err(Error::InvalidConfig("d_bbf and num_classes must be positive".into()));
        }
        match self.variant {
            FrVariant::SquareLinearOnly => {}
            FrVariant::KNonlinearLayers(0) => {
                return Err(Error::InvalidConfig("k_nonlinear_layers requires k >= 1".into()));
            }
            _ => {
                if self.d_frf == 0 {
                    return Err(Error::InvalidConfig("d_frf must be positive".into()));
                }
                if self.d_frf > self.d_bbf {
                    return Err(Error::InvalidConfig(format!(
                        "reduction variant requires d_frf <= d_bbf, got {} > {}",
                        self.d_frf, self.d_bbf
                    )));
                }
            }
        }
        Ok(())
    }

    /// Closed-form trainable parameter count for the configured variant.
    pub fn expected_param_count(&self) -> usize {
        let (d_bbf, d_frf, c) = (self.d_bbf, self.d_frf, self.num_classes);
        let reduce = d_bbf * d_frf + d_frf;
        let square = d_frf * d_frf + d_frf;
        let norms = 4 * d_frf;
        let classifier = d_frf * c + c;
        match self.variant {
            FrVariant::Full => reduce + 2 * square + norms + classifier,
            FrVariant::KNonlinearLayers(k) => reduce + (k + 1) * square + norms + classifier,
            FrVariant::NoLayerNorm => reduce + 2 * square + classifier,
            FrVariant::ReduceOnly => reduce + classifier,
            FrVariant::SquareLinearOnly => (d_bbf * d_bbf + d_bbf) + (d_bbf * c + c),
        }
    }
}

pub(crate) enum FrLayer<S: Scalar> {
    Linear(Linear<S>),
    Norm(LayerNorm<S>),
    Relu,
}

pub struct FeatureRefinerHead<S: Scalar> {
    pub(crate) stack: Vec<FrLayer<S>>,
    pub(crate) classifier: Linear<S>,
    config: FeatureRefinerConfig,
}

/// Build the head. Weights come from `init`; layer norms start at
/// scale 1 / shift 0 and biases at zero.
pub fn build_feature_refiner<S: Scalar>(
    config: &FeatureRefinerConfig,
    init: &InitSpec,
) -> Result<FeatureRefinerHead<S>> {
    config.validate()?;
    let mut rng = init.rng();
    let scheme = init.scheme;
    let (d_bbf, d_frf, c) = (config.d_bbf, config.d_frf, config.num_classes);

    let mut stack: Vec<FrLayer<S>> = Vec::new();
    let classifier_in = match config.variant {
        FrVariant::Full | FrVariant::KNonlinearLayers(_) => {
            let k = match config.variant {
                FrVariant::KNonlinearLayers(k) => k,
                _ => 1,
            };
            stack.push(FrLayer::Linear(Linear::new(d_bbf, d_frf, scheme, &mut rng)));
            stack.push(FrLayer::Norm(LayerNorm::new(d_frf)));
            for _ in 0..k {
                stack.push(FrLayer::Linear(Linear::new(d_frf, d_frf, scheme, &mut rng)));
                stack.push(FrLayer::Relu);
            }
            stack.push(FrLayer::Linear(Linear::new(d_frf, d_frf, scheme, &mut rng)));
            if config.double_relu {
                stack.push(FrLayer::Relu);
            }
            stack.push(FrLayer::Norm(LayerNorm::new(d_frf)));
            d_frf
        }
        FrVariant::NoLayerNorm => {
            stack.push(FrLayer::Linear(Linear::new(d_bbf, d_frf, scheme, &mut rng)));
            stack.push(FrLayer::Linear(Linear::new(d_frf, d_frf, scheme, &mut rng)));
            stack.push(FrLayer::Relu);
            stack.push(FrLayer::Linear(Linear::new(d_frf, d_frf, scheme, &mut rng)));
            if config.double_relu {
                stack.push(FrLayer::Relu);
            }
            d_frf
        }
        FrVariant::ReduceOnly => {
            stack.push(FrLayer::Linear(Linear::new(d_bbf, d_frf, scheme, &mut rng)));
            d_frf
        }
        FrVariant::SquareLinearOnly => {
            stack.push(FrLayer::Linear(Linear::new(d_bbf, d_bbf, scheme, &mut rng)));
            d_bbf
        }
    };
    let classifier = Linear::new(classifier_in, c, scheme, &mut rng);
    Ok(FeatureRefinerHead { stack, classifier, config: *config })
}

impl<S: Scalar> FeatureRefinerHead<S> {
    pub fn config(&self) -> &FeatureRefinerConfig {
        &self.config
    }

    /// `(N, d_bbf)` features to `(N, C)` logits. Gradient flows back to the
    /// features: there is no gate on this path.
    pub fn forward(&self, tape: &Tape<S>, features: &Tensor<S>) -> Result<Tensor<S>> {
        let mut h = features.clone();
        for layer in &self.stack {
            h = match layer {
                FrLayer::Linear(l) => l.forward(tape, &h)?,
                FrLayer::Norm(n) => n.forward(tape, &h)?,
                FrLayer::Relu => tape.relu(&h)?,
            };
        }
        self.classifier.forward(tape, &h)
    }

    pub fn append_params(&self, prefix: &str, out: &mut Vec<NamedTensor<S>>) {
        let mut li = 0usize;
        let mut ni = 0usize;
        for layer in &self.stack {
            match layer {
                FrLayer::Linear(l) => {
                    l.append_params(&format!("{prefix}.fc{li}"), out);
                    li += 1;
                }
                FrLayer::Norm(n) => {
                    n.append_params(&format!("{prefix}.ln{ni}"), out);
                    ni += 1;
                }
                FrLayer::Relu => {}
            }
        }
        self.classifier.append_params(&format!("{prefix}.classifier"), out);
    }

    /// Actual count of trainable scalars in the built head.
    pub fn param_count(&self) -> usize {
        let mut named = Vec::new();
        self.append_params("fr", &mut named);
        crate::nn::count_trainable(&named)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn build64(config: &FeatureRefinerConfig) -> FeatureRefinerHead<f64> {
        build_feature_refiner(config, &InitSpec::kaiming(11)).unwrap()
    }

    #[test]
    fn full_head_counts_match_published_accounting() {
        for (d_bbf, d_frf, c, want) in
            [(512, 64, 10, 42058usize), (1024, 64, 10, 74826), (512, 256, 101, 289893)]
        {
            let cfg = FeatureRefinerConfig::full(d_bbf, d_frf, c);
            assert_eq!(cfg.expected_param_count(), want, "closed form for {d_bbf}/{d_frf}/{c}");
            let head: FeatureRefinerHead<f32> =
                build_feature_refiner(&cfg, &InitSpec::kaiming(0)).unwrap();
            assert_eq!(head.param_count(), want, "built head for {d_bbf}/{d_frf}/{c}");
        }
    }

    #[test]
    fn full_equals_k1_and_k_is_strictly_monotonic() {
        let base = FeatureRefinerConfig::full(64, 16, 10);
        let k1 = base.with_variant(FrVariant::KNonlinearLayers(1));
        assert_eq!(base.expected_param_count(), k1.expected_param_count());
        let mut prev = k1.expected_param_count();
        for k in 2..6 {
            let cfg = base.with_variant(FrVariant::KNonlinearLayers(k));
            let count = cfg.expected_param_count();
            assert!(count > prev, "k={k} not strictly larger");
            assert_eq!(count, build64(&cfg).param_count());
            prev = count;
        }
    }

    #[test]
    fn variant_counts_match_built_heads() {
        let base = FeatureRefinerConfig::full(48, 12, 7);
        for variant in [
            FrVariant::Full,
            FrVariant::NoLayerNorm,
            FrVariant::ReduceOnly,
            FrVariant::SquareLinearOnly,
            FrVariant::KNonlinearLayers(3),
        ] {
            let cfg = base.with_variant(variant);
            assert_eq!(build64(&cfg).param_count(), cfg.expected_param_count(), "{variant:?}");
        }
    }

    #[test]
    fn zero_final_affine_gives_zero_logits() {
        let cfg = FeatureRefinerConfig::full(8, 4, 3);
        let head = build64(&cfg);
        // Zero the final layer norm's scale and the classifier bias.
        if let Some(FrLayer::Norm(ln)) = head.stack.last() {
            ln.gamma.update_data(|d| d.iter_mut().for_each(|v| *v = 0.0));
            ln.beta.update_data(|d| d.iter_mut().for_each(|v| *v = 0.0));
        } else {
            panic!("full stack must end with a layer norm");
        }
        head.classifier.weight.update_data(|d| d.iter_mut().for_each(|v| *v = 0.5));
        head.classifier.bias.update_data(|d| d.iter_mut().for_each(|v| *v = 0.0));
        let tape = Tape::new();
        let f = Tensor::from_vec((0..16).map(|i| i as f64 * 0.3 - 1.0).collect(), &[2, 8]);
        let logits = head.forward(&tape, &f).unwrap();
        assert!(logits.to_vec().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn duplicated_feature_rows_give_duplicated_logit_rows() {
        let cfg = FeatureRefinerConfig::full(6, 3, 4);
        let head = build64(&cfg);
        let tape = Tape::new();
        let row: Vec<f64> = vec![0.4, -1.1, 2.0, 0.9, -0.2, 1.5];
        let mut two = row.clone();
        two.extend_from_slice(&row);
        let logits = head.forward(&tape, &Tensor::from_vec(two, &[2, 6])).unwrap().to_vec();
        assert_eq!(&logits[0..4], &logits[4..8]);
    }

    #[test]
    fn full_head_gradient_matches_finite_differences() {
        use crate::autodiff::finite_difference_check_multi;
        let cfg = FeatureRefinerConfig::full(5, 3, 2);
        let head = build64(&cfg);
        let mut rng = Rng::new(23);
        let f = Tensor::from_vec((0..10).map(|_| rng.gauss()).collect(), &[2, 5]);
        let mut probes = vec![f.clone()];
        let mut named = Vec::new();
        head.append_params("fr", &mut named);
        probes.extend(named.into_iter().map(|n| n.tensor));
        let err = finite_difference_check_multi(
            |tape| {
                let logits = head.forward(tape, &f)?;
                tape.softmax_cross_entropy(&logits, &[1, 0])
            },
            &probes,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn reduce_only_equals_full_with_identity_mlp_and_passthrough_norms() {
        // Layer-ordering check: make the MLP block exactly the identity
        // (identity weights, zero biases, pass-through norms) and feed
        // nonnegative activations so the relu is also a pass-through; the
        // full head must then match reduce_only with shared reduce and
        // classifier weights.
        let d_bbf = 6;
        let d_frf = 4;
        let c = 3;
        let mut rng = Rng::new(31);

        let reduce: Linear<f64> = Linear::new(d_bbf, d_frf, crate::nn::InitScheme::KaimingUniform, &mut rng);
        // Nonnegative reduce weights keep post-reduce activations nonnegative
        // for nonnegative features.
        reduce.weight.update_data(|d| d.iter_mut().for_each(|v| *v = v.abs()));
        let classifier: Linear<f64> = Linear::new(d_frf, c, crate::nn::InitScheme::KaimingUniform, &mut rng);

        let full = FeatureRefinerHead {
            stack: vec![
                FrLayer::Linear(clone_linear(&reduce)),
                FrLayer::Norm(LayerNorm::passthrough(d_frf)),
                FrLayer::Linear(Linear::identity(d_frf)),
                FrLayer::Relu,
                FrLayer::Linear(Linear::identity(d_frf)),
                FrLayer::Norm(LayerNorm::passthrough(d_frf)),
            ],
            classifier: clone_linear(&classifier),
            config: FeatureRefinerConfig::full(d_bbf, d_frf, c),
        };
        let reduce_only = FeatureRefinerHead {
            stack: vec![FrLayer::Linear(clone_linear(&reduce))],
            classifier: clone_linear(&classifier),
            config: FeatureRefinerConfig::full(d_bbf, d_frf, c)
                .with_variant(FrVariant::ReduceOnly),
        };

        let tape = Tape::new();
        let features =
            Tensor::from_vec((0..2 * d_bbf).map(|_| rng.next_f64()).collect(), &[2, d_bbf]);
        let a = full.forward(&tape, &features).unwrap();
        let b = reduce_only.forward(&tape, &features).unwrap();
        assert!(a.bit_eq(&b));
    }

    fn clone_linear(l: &Linear<f64>) -> Linear<f64> {
        let layer: Linear<f64> =
            Linear::new(l.d_in(), l.d_out(), crate::nn::InitScheme::Zeros, &mut Rng::new(0));
        layer.weight.set_data(&l.weight.to_vec());
        layer.bias.set_data(&l.bias.to_vec());
        layer
    }

    #[test]
    fn invalid_variants_are_rejected() {
        assert!(FeatureRefinerConfig::full(8, 16, 3).validate().is_err(), "d_frf > d_bbf");
        assert!(FeatureRefinerConfig::full(8, 4, 3)
            .with_variant(FrVariant::KNonlinearLayers(0))
            .validate()
            .is_err());
    }
}
