//! SGD training with momentum, weight decay and a single-drop learning-rate
//! schedule, plus evaluation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor};
use crate::data::{AugmentSpec, Dataset};
use crate::error::{Error, Result};
use crate::model::{ojkd_loss, DualHeadNetwork};
use crate::nn::{Mode, NamedTensor};
use crate::rng::{substream, Rng};
use crate::scalar::Scalar;

fn default_batch_size() -> usize {
    128
}
fn default_drop_fraction() -> f64 {
    0.8
}
fn default_drop_factor() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_drop_fraction")]
    pub lr_drop_fraction: f64,
    #[serde(default = "default_drop_factor")]
    pub lr_drop_factor: f64,
}

impl OptimizerConfig {
    /// lr 0.1, momentum 0.9, weight decay 5e-4, one drop by 10x after 80% of
    /// the epochs.
    pub fn standard(epochs: usize) -> Self {
        OptimizerConfig {
            lr0: 0.1,
            momentum: 0.9,
            weight_decay: 5e-4,
            epochs,
            batch_size: default_batch_size(),
            lr_drop_fraction: default_drop_fraction(),
            lr_drop_factor: default_drop_factor(),
        }
    }

    /// `lr0 == 0` is tolerated here so no-op training runs stay expressible;
    /// experiment-level validation is stricter.
    pub fn validate(&self) -> Result<()> {
        if self.lr0.is_nan() || self.lr0 < 0.0 || !self.lr0.is_finite() {
            return Err(Error::InvalidConfig("lr0 must be finite and nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must be in [0, 1)".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::InvalidConfig("weight_decay must be nonnegative".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch_size must be positive".into()));
        }
        if !(self.lr_drop_fraction > 0.0 && self.lr_drop_fraction <= 1.0) {
            return Err(Error::InvalidConfig("lr_drop_fraction must be in (0, 1]".into()));
        }
        if self.lr_drop_factor <= 0.0 {
            return Err(Error::InvalidConfig("lr_drop_factor must be positive".into()));
        }
        Ok(())
    }
}

/// Piecewise-constant schedule with one drop at
/// `floor(lr_drop_fraction * epochs)`.
pub fn lr_at(epoch: usize, config: &OptimizerConfig) -> Result<f64> {
    if epoch >= config.epochs {
        return Err(Error::EpochOutOfRange { epoch, epochs: config.epochs });
    }
    let drop_epoch = (config.lr_drop_fraction * config.epochs as f64).floor() as usize;
    Ok(if epoch < drop_epoch { config.lr0 } else { config.lr0 / config.lr_drop_factor })
}

/// Momentum SGD over a fixed parameter list.
///
/// Step rule (weight decay folded into the gradient before momentum):
///
/// ```text
/// v <- momentum * v + grad + weight_decay * param
/// param <- param - lr(epoch) * v
/// ```
pub struct Sgd<S: Scalar> {
    params: Vec<NamedTensor<S>>,
    velocity: Vec<Vec<S>>,
    config: OptimizerConfig,
}

impl<S: Scalar> Sgd<S> {
    pub fn new(params: Vec<NamedTensor<S>>, config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        let params: Vec<NamedTensor<S>> = params.into_iter().filter(|p| p.trainable).collect();
        let velocity = params.iter().map(|p| vec![S::ZERO; p.tensor.numel()]).collect();
        Ok(Sgd { params, velocity, config })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn zero_grads(&self) {
        for p in &self.params {
            p.tensor.zero_grad();
        }
    }

    /// One update over all parameters; every parameter must carry a gradient.
    pub fn step(&mut self, epoch: usize) -> Result<()> {
        let lr = S::from_f64(lr_at(epoch, &self.config)?);
        let momentum = S::from_f64(self.config.momentum);
        let wd = S::from_f64(self.config.weight_decay);
        for (p, v) in self.params.iter().zip(self.velocity.iter_mut()) {
            let grad = p
                .tensor
                .grad()
                .ok_or_else(|| Error::MissingGrad { param: p.name.clone() })?;
            p.tensor.update_data(|data| {
                for ((d, g), vel) in data.iter_mut().zip(&grad).zip(v.iter_mut()) {
                    *vel = momentum * *vel + *g + wd * *d;
                    *d -= lr * *vel;
                }
            });
        }
        Ok(())
    }
}

/// Data for one supervised run: the train split, the subset of labeled
/// indices visible to the optimizer, the test split and an optional
/// augmentation pipeline (train-time spec; evaluation applies its
/// normalization-only counterpart).
pub struct TrainSetup<'a> {
    pub train: &'a Dataset,
    pub labeled: &'a [usize],
    pub test: &'a Dataset,
    pub augment: Option<&'a AugmentSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    /// Mean joint loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Final test accuracy through the deployed path (original head).
    pub accuracy_original: f64,
    /// Final test accuracy of the refiner head, when one exists.
    pub accuracy_fr: Option<f64>,
    pub seed: u64,
    /// Informational only; never part of determinism comparisons or reports.
    pub wall_clock_secs: f64,
}

const SHUFFLE_TAG: u64 = 0x0001_0000;
const AUGMENT_TAG: u64 = 0x0002_0000;

/// Full-epoch minibatch SGD over the labeled subset, deterministic given the
/// seed. Evaluation goes through the inference path.
pub fn train<S: Scalar>(
    net: &DualHeadNetwork<S>,
    setup: &TrainSetup<'_>,
    config: &OptimizerConfig,
    seed: u64,
) -> Result<TrainResult> {
    if setup.labeled.is_empty() {
        return Err(Error::EmptyDataset("no labeled samples to train on"));
    }
    if setup.test.is_empty() {
        return Err(Error::EmptyDataset("empty test set"));
    }
    if let Some(spec) = setup.augment {
        spec.validate(setup.train.shape())?;
    }
    let started = Instant::now();

    let mut sgd = Sgd::new(net.named_tensors(), config.clone())?;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = setup.labeled.to_vec();

    for epoch in 0..config.epochs {
        let mut shuffle_rng = Rng::new(substream(substream(seed, SHUFFLE_TAG), epoch as u64));
        shuffle_rng.shuffle(&mut order);
        let augment_epoch_seed = substream(substream(seed, AUGMENT_TAG), epoch as u64);

        let mut loss_sum = 0.0f64;
        let mut seen = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let (batch, labels) = assemble_batch::<S>(setup.train, chunk, setup.augment, augment_epoch_seed);
            let tape = Tape::new();
            let (logits_original, logits_fr) = net.forward_train(&tape, &batch, Mode::Train)?;
            let loss = ojkd_loss(&tape, &logits_original, logits_fr.as_ref(), &labels)?;
            sgd.zero_grads();
            tape.backward(&loss)?;
            sgd.step(epoch)?;
            loss_sum += loss.to_vec()[0].to_f64() * chunk.len() as f64;
            seen += chunk.len();
        }
        epoch_losses.push(loss_sum / seen as f64);
    }

    let eval_spec = setup.augment.map(|a| a.eval_transform());
    let (accuracy_original, accuracy_fr) = evaluate_heads(net, setup.test, eval_spec.as_ref())?;
    Ok(TrainResult {
        epoch_losses,
        accuracy_original,
        accuracy_fr,
        seed,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

fn assemble_batch<S: Scalar>(
    train: &Dataset,
    indices: &[usize],
    augment_spec: Option<&AugmentSpec>,
    epoch_seed: u64,
) -> (Tensor<S>, Vec<usize>) {
    match (augment_spec, train.shape()) {
        (Some(spec), crate::backbone::InputShape::Image { channels, height, width }) => train
            .batch_with(indices, |idx, raw| {
                let mut rng = Rng::derived(epoch_seed, idx as u64);
                crate::data::augment(raw, channels, height, width, spec, &mut rng)
            }),
        _ => train.batch(indices),
    }
}

/// Deterministic argmax: the lowest class index wins ties.
pub fn argmax_row<S: Scalar>(row: &[S]) -> usize {
    let mut best = 0usize;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

const EVAL_BATCH: usize = 256;

/// Fraction of argmax-correct predictions through `forward_infer`.
pub fn evaluate<S: Scalar>(
    net: &DualHeadNetwork<S>,
    test: &Dataset,
    transform: Option<&AugmentSpec>,
) -> Result<f64> {
    Ok(evaluate_heads(net, test, transform)?.0)
}

/// Accuracy of both heads in eval mode; the refiner entry is `None` for
/// baseline networks.
pub fn evaluate_heads<S: Scalar>(
    net: &DualHeadNetwork<S>,
    test: &Dataset,
    transform: Option<&AugmentSpec>,
) -> Result<(f64, Option<f64>)> {
    if test.is_empty() {
        return Err(Error::EmptyDataset("empty test set"));
    }
    let classes = net.num_classes();
    let mut correct_original = 0usize;
    let mut correct_fr = 0usize;
    let has_fr = net.fr_head.is_some();

    let all: Vec<usize> = (0..test.len()).collect();
    for chunk in all.chunks(EVAL_BATCH) {
        let (batch, labels) = assemble_batch::<S>(test, chunk, transform, 0);
        let logits = net.forward_infer(&batch)?;
        let data = logits.to_vec();
        for (row, label) in data.chunks_exact(classes).zip(&labels) {
            if argmax_row(row) == *label {
                correct_original += 1;
            }
        }
        if has_fr {
            let fr_logits = net.forward_fr_eval(&batch)?.expect("fr head present");
            let fr_data = fr_logits.to_vec();
            for (row, label) in fr_data.chunks_exact(classes).zip(&labels) {
                if argmax_row(row) == *label {
                    correct_fr += 1;
                }
            }
        }
    }
    let n = test.len() as f64;
    let acc_fr = if has_fr { Some(correct_fr as f64 / n) } else { None };
    Ok((correct_original as f64 / n, acc_fr))
}

#[cfg(test)]
mod tests {
    use super::train as train_fn;
    use super::*;
    use crate::backbone::BackboneConfig;
    use crate::model::{build_network, ModelConfig};
    use crate::nn::InitSpec;

    fn named(t: Tensor<f64>) -> Vec<NamedTensor<f64>> {
        vec![NamedTensor::new("p", t, true)]
    }

    #[test]
    fn vanilla_step() {
        let p = Tensor::param(vec![1.0f64], &[1]);
        let cfg = OptimizerConfig {
            lr0: 0.1,
            momentum: 0.0,
            weight_decay: 0.0,
            epochs: 10,
            batch_size: 1,
            lr_drop_fraction: 1.0,
            lr_drop_factor: 10.0,
        };
        let mut sgd = Sgd::new(named(p.clone()), cfg).unwrap();
        p.accumulate_grad(&[1.0]);
        sgd.step(0).unwrap();
        assert!((p.to_vec()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn two_step_momentum_recurrence() {
        // v1 = 1, p = 0.9; v2 = 0.9 + 1 = 1.9, p = 0.9 - 0.19 = 0.71.
        let p = Tensor::param(vec![1.0f64], &[1]);
        let cfg = OptimizerConfig {
            lr0: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
            epochs: 10,
            batch_size: 1,
            lr_drop_fraction: 1.0,
            lr_drop_factor: 10.0,
        };
        let mut sgd = Sgd::new(named(p.clone()), cfg).unwrap();
        p.zero_grad();
        p.accumulate_grad(&[1.0]);
        sgd.step(0).unwrap();
        assert!((p.to_vec()[0] - 0.9).abs() < 1e-15);
        p.zero_grad();
        p.accumulate_grad(&[1.0]);
        sgd.step(0).unwrap();
        assert!((p.to_vec()[0] - 0.71).abs() < 1e-12);
    }

    #[test]
    fn decay_only_step() {
        let p = Tensor::param(vec![1.0f64], &[1]);
        let cfg = OptimizerConfig {
            lr0: 0.1,
            momentum: 0.0,
            weight_decay: 5e-4,
            epochs: 1,
            batch_size: 1,
            lr_drop_fraction: 1.0,
            lr_drop_factor: 10.0,
        };
        let mut sgd = Sgd::new(named(p.clone()), cfg).unwrap();
        p.zero_grad();
        sgd.step(0).unwrap();
        assert!((p.to_vec()[0] - 0.99995).abs() < 1e-12);
    }

    #[test]
    fn missing_grad_is_an_error() {
        let p = Tensor::param(vec![1.0f64], &[1]);
        let mut sgd = Sgd::new(named(p), OptimizerConfig::standard(1)).unwrap();
        assert!(matches!(sgd.step(0), Err(Error::MissingGrad { .. })));
    }

    #[test]
    fn schedule_boundaries() {
        let cfg = OptimizerConfig::standard(200);
        assert_eq!(lr_at(159, &cfg).unwrap(), 0.1);
        assert_eq!(lr_at(160, &cfg).unwrap(), 0.1 / 10.0);
        assert!(matches!(lr_at(200, &cfg), Err(Error::EpochOutOfRange { .. })));

        let cfg10 = OptimizerConfig::standard(10);
        assert_eq!(lr_at(8, &cfg10).unwrap(), 0.1 / 10.0);
        assert_eq!(lr_at(7, &cfg10).unwrap(), 0.1);
    }

    #[test]
    fn schedule_has_exactly_one_drop() {
        let cfg = OptimizerConfig::standard(50);
        let mut drops = 0;
        for e in 1..50 {
            if lr_at(e, &cfg).unwrap() != lr_at(e - 1, &cfg).unwrap() {
                drops += 1;
            }
        }
        assert_eq!(drops, 1);
    }

    fn blob_setup(seed: u64) -> (Dataset, Dataset) {
        crate::data::make_synthetic(&crate::data::SyntheticSpec {
            kind: crate::data::SyntheticKind::Blobs,
            classes: 2,
            train_per_class: 40,
            test_per_class: 25,
            noise: 0.3,
            seed,
            image_size: None,
            embed_dim: None,
            embed_noise: 0.0,
        })
        .unwrap()
    }

    fn mlp_model(variant: &str) -> ModelConfig {
        ModelConfig {
            backbone: BackboneConfig::mlp(2, vec![16], 16),
            variant: variant.into(),
            d_frf: 8,
            num_classes: 2,
            double_relu: false,
        }
    }

    #[test]
    fn zero_lr_leaves_parameters_unchanged() {
        let (train, test) = blob_setup(1);
        let net = build_network::<f64>(&mlp_model("baseline"), &InitSpec::kaiming(5)).unwrap();
        let before: Vec<Vec<f64>> =
            net.trainable_params().iter().map(|p| p.to_vec()).collect();
        let init_acc = evaluate(&net, &test, None).unwrap();

        let cfg = OptimizerConfig {
            lr0: 0.0,
            momentum: 0.9,
            weight_decay: 5e-4,
            epochs: 1,
            batch_size: 16,
            lr_drop_fraction: 0.8,
            lr_drop_factor: 10.0,
        };
        let labeled: Vec<usize> = (0..train.len()).collect();
        let setup = TrainSetup { train: &train, labeled: &labeled, test: &test, augment: None };
        let result = train_fn(&net, &setup, &cfg, 3);
        let after: Vec<Vec<f64>> = net.trainable_params().iter().map(|p| p.to_vec()).collect();
        assert_eq!(before, after);
        assert_eq!(result.unwrap().accuracy_original, init_acc);
    }

    #[test]
    fn separable_blobs_reach_95_percent() {
        // Independent oracle: ridge-regularized least squares on one-hot
        // targets over the raw coordinates clears 0.95 on this task, so a
        // trained network must as well.
        let (train_ds, test_ds) = blob_setup(2);
        let oracle_acc = least_squares_accuracy(&train_ds, &test_ds);
        assert!(oracle_acc >= 0.95, "oracle accuracy {oracle_acc}");

        let net = build_network::<f32>(&mlp_model("baseline"), &InitSpec::kaiming(6)).unwrap();
        let cfg = OptimizerConfig {
            lr0: 0.05,
            momentum: 0.9,
            weight_decay: 5e-4,
            epochs: 50,
            batch_size: 16,
            lr_drop_fraction: 0.8,
            lr_drop_factor: 10.0,
        };
        let labeled: Vec<usize> = (0..train_ds.len()).collect();
        let setup = TrainSetup { train: &train_ds, labeled: &labeled, test: &test_ds, augment: None };
        let result = train_fn(&net, &setup, &cfg, 7).unwrap();
        assert!(result.accuracy_original >= 0.95, "trained accuracy {}", result.accuracy_original);
    }

    /// Closed-form ridge classifier on [x, y, 1] features.
    fn least_squares_accuracy(train: &Dataset, test: &Dataset) -> f64 {
        let d = 3;
        let c = train.class_count();
        let mut xtx = vec![0.0f64; d * d];
        let mut xty = vec![0.0f64; d * c];
        for i in 0..train.len() {
            let s = train.sample(i);
            let row = [s[0] as f64, s[1] as f64, 1.0];
            for a in 0..d {
                for b in 0..d {
                    xtx[a * d + b] += row[a] * row[b];
                }
                xty[a * c + train.label(i)] += row[a];
            }
        }
        for a in 0..d {
            xtx[a * d + a] += 1e-6;
        }
        let w = solve_multi(&mut xtx, &mut xty, d, c);
        let mut correct = 0usize;
        for i in 0..test.len() {
            let s = test.sample(i);
            let row = [s[0] as f64, s[1] as f64, 1.0];
            let mut best = (0usize, f64::NEG_INFINITY);
            for class in 0..c {
                let score: f64 = (0..d).map(|a| row[a] * w[a * c + class]).sum();
                if score > best.1 {
                    best = (class, score);
                }
            }
            if best.0 == test.label(i) {
                correct += 1;
            }
        }
        correct as f64 / test.len() as f64
    }

    /// Gaussian elimination solving `A W = B` for small dense systems.
    fn solve_multi(a: &mut [f64], b: &mut [f64], n: usize, m: usize) -> Vec<f64> {
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i * n + col].abs().partial_cmp(&a[j * n + col].abs()).unwrap())
                .unwrap();
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            for k in 0..m {
                b.swap(col * m + k, pivot * m + k);
            }
            let p = a[col * n + col];
            for row in 0..n {
                if row == col {
                    continue;
                }
                let f = a[row * n + col] / p;
                for k in 0..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                for k in 0..m {
                    b[row * m + k] -= f * b[col * m + k];
                }
            }
        }
        let mut w = vec![0.0f64; n * m];
        for row in 0..n {
            for k in 0..m {
                w[row * m + k] = b[row * m + k] / a[row * n + row];
            }
        }
        w
    }

    #[test]
    fn same_seed_gives_bit_identical_results() {
        let (train_ds, test_ds) = blob_setup(3);
        let labeled: Vec<usize> = (0..40).collect();
        let cfg = OptimizerConfig {
            lr0: 0.1,
            momentum: 0.9,
            weight_decay: 5e-4,
            epochs: 5,
            batch_size: 8,
            lr_drop_fraction: 0.8,
            lr_drop_factor: 10.0,
        };
        let run = || {
            let net = build_network::<f32>(&mlp_model("fr_ojkd"), &InitSpec::kaiming(9)).unwrap();
            let setup =
                TrainSetup { train: &train_ds, labeled: &labeled, test: &test_ds, augment: None };
            let r = train_fn(&net, &setup, &cfg, 11).unwrap();
            let params: Vec<u64> = net
                .trainable_params()
                .iter()
                .flat_map(|p| p.to_vec().into_iter().map(|v| v.bits()))
                .collect();
            (r.epoch_losses, r.accuracy_original, r.accuracy_fr, params)
        };
        let (l1, a1, f1, p1) = run();
        let (l2, a2, f2, p2) = run();
        assert_eq!(l1, l2);
        assert_eq!(a1, a2);
        assert_eq!(f1, f2);
        assert_eq!(p1, p2);
    }

    /// A miniature training loop with an explicit weight on the original
    /// head's loss, for trajectory-invariance checks.
    fn train_steps_with_weight(
        variant: &str,
        weight: f64,
        steps: usize,
    ) -> Vec<Vec<f64>> {
        let (train_ds, _) = blob_setup(6);
        let net = build_network::<f64>(&mlp_model(variant), &InitSpec::kaiming(12)).unwrap();
        let cfg = OptimizerConfig {
            lr0: 0.05,
            momentum: 0.9,
            weight_decay: 5e-4,
            epochs: 1,
            batch_size: 8,
            lr_drop_fraction: 1.0,
            lr_drop_factor: 10.0,
        };
        let mut sgd = Sgd::new(net.named_tensors(), cfg).unwrap();
        let mut order: Vec<usize> = (0..train_ds.len()).collect();
        Rng::new(99).shuffle(&mut order);
        for chunk in order.chunks(8).take(steps) {
            let (batch, labels) = train_ds.batch::<f64>(chunk);
            let tape = Tape::new();
            let (lo, lf) = net.forward_train(&tape, &batch, Mode::Train).unwrap();
            let ce_orig = tape.softmax_cross_entropy(&lo, &labels).unwrap();
            let loss = match lf {
                Some(fr) => {
                    let ce_fr = tape.softmax_cross_entropy(&fr, &labels).unwrap();
                    let weighted = tape.scale(&ce_orig, weight).unwrap();
                    tape.add(&weighted, &ce_fr).unwrap()
                }
                None => ce_orig,
            };
            sgd.zero_grads();
            tape.backward(&loss).unwrap();
            sgd.step(0).unwrap();
        }
        let mut named = Vec::new();
        net.backbone.append_params("bb", &mut named);
        named.into_iter().map(|t| t.tensor.to_vec()).collect()
    }

    #[test]
    fn gated_backbone_trajectory_ignores_original_head_loss_scale() {
        // With the gate on, scaling the original head's loss by 5 must leave
        // the backbone parameter trajectory untouched after several steps.
        let w1 = train_steps_with_weight("fr_ojkd", 1.0, 6);
        let w5 = train_steps_with_weight("fr_ojkd", 5.0, 6);
        assert_eq!(w1, w5);
    }

    #[test]
    fn no_gate_zero_fr_weight_reduces_to_baseline_training() {
        // Gate off and the refiner head silenced: backbone gradients are
        // exactly single-head training. The baseline network shares backbone
        // and head initialization (the refiner draws from its own stream).
        let (train_ds, _) = blob_setup(7);
        let chunk: Vec<usize> = (0..16).collect();
        let (batch, labels) = train_ds.batch::<f64>(&chunk);

        let grads_of = |variant: &str, fr_weight: f64| -> Vec<Vec<f64>> {
            let mut net =
                build_network::<f64>(&mlp_model(variant), &InitSpec::kaiming(20)).unwrap();
            net.set_gate(false);
            let tape = Tape::new();
            let (lo, lf) = net.forward_train(&tape, &batch, Mode::Train).unwrap();
            let ce_orig = tape.softmax_cross_entropy(&lo, &labels).unwrap();
            let loss = match lf {
                Some(fr) => {
                    let ce_fr = tape.softmax_cross_entropy(&fr, &labels).unwrap();
                    let scaled_fr = tape.scale(&ce_fr, fr_weight).unwrap();
                    tape.add(&ce_orig, &scaled_fr).unwrap()
                }
                None => ce_orig,
            };
            tape.backward(&loss).unwrap();
            let mut named = Vec::new();
            net.backbone.append_params("bb", &mut named);
            named
                .iter()
                .map(|t| t.tensor.grad().unwrap_or_default())
                .chain(std::iter::once(net.original_head.weight.grad().unwrap()))
                .collect()
        };

        let dual = grads_of("fr_no_gate", 0.0);
        let baseline = grads_of("baseline", 0.0);
        assert_eq!(dual, baseline);
    }

    #[test]
    fn gate_toggle_changes_backbone_gradients_when_disabled() {
        let (train_ds, _) = blob_setup(8);
        let chunk: Vec<usize> = (0..16).collect();
        let (batch, labels) = train_ds.batch::<f64>(&chunk);
        let grads_with_gate = |enabled: bool| -> Vec<Vec<f64>> {
            let mut net =
                build_network::<f64>(&mlp_model("fr_ojkd"), &InitSpec::kaiming(21)).unwrap();
            net.set_gate(enabled);
            let tape = Tape::new();
            let (lo, lf) = net.forward_train(&tape, &batch, Mode::Train).unwrap();
            let loss = crate::model::ojkd_loss(&tape, &lo, lf.as_ref(), &labels).unwrap();
            tape.backward(&loss).unwrap();
            let mut named = Vec::new();
            net.backbone.append_params("bb", &mut named);
            named.iter().map(|t| t.tensor.grad().unwrap_or_default()).collect()
        };
        assert_ne!(grads_with_gate(true), grads_with_gate(false));
    }

    #[test]
    fn constant_logits_tie_break_to_class_zero() {
        let (_, test_ds) = blob_setup(4);
        let net = build_network::<f64>(&mlp_model("baseline"), &InitSpec::kaiming(1)).unwrap();
        // Zero all parameters: every logit row is constant, argmax picks 0.
        for p in net.trainable_params() {
            p.update_data(|d| d.iter_mut().for_each(|v| *v = 0.0));
        }
        let acc = evaluate(&net, &test_ds, None).unwrap();
        let class0_freq = test_ds.labels().iter().filter(|l| **l == 0).count() as f64
            / test_ds.len() as f64;
        assert_eq!(acc, class0_freq);
    }

    #[test]
    fn perfect_classifier_scores_exactly_one() {
        // Noiseless blobs put class 0 at (2,0) and class 1 at (-2,0).
        // A hand-built passthrough backbone plus a biased head separates
        // them perfectly, so accuracy must be exactly 1.0.
        let (_, test_ds) = crate::data::make_synthetic(&crate::data::SyntheticSpec {
            kind: crate::data::SyntheticKind::Blobs,
            classes: 2,
            train_per_class: 5,
            test_per_class: 20,
            noise: 0.0,
            seed: 8,
            image_size: None,
            embed_dim: None,
            embed_noise: 0.0,
        })
        .unwrap();
        let cfg = ModelConfig {
            backbone: BackboneConfig::mlp(2, vec![], 2),
            variant: "baseline".into(),
            d_frf: 2,
            num_classes: 2,
            double_relu: false,
        };
        let net = build_network::<f64>(&cfg, &InitSpec::kaiming(0)).unwrap();
        // Backbone: identity weights, so features = relu(x); class 0 maps to
        // (2, 0) and class 1 to (0, 0).
        let params = net.trainable_params();
        params[0].set_data(&[1.0, 0.0, 0.0, 1.0]); // backbone fc weight
        params[1].set_data(&[0.0, 0.0]); // backbone fc bias
        params[2].set_data(&[1.0, 0.0, 0.0, 0.0]); // head weight [2x2]
        params[3].set_data(&[0.0, 0.5]); // head bias
        let acc = evaluate(&net, &test_ds, None).unwrap();
        assert_eq!(acc, 1.0);
    }
}
