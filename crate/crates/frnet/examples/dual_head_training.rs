//! Joint dual-head training on a synthetic task, with the refiner head
//! dropped at inference.
//!
//! Trains the gated dual-head network, evaluates both heads, shows that the
//! inference path is bit-identical to the original-head branch, and
//! round-trips the weights through a checkpoint.
//!
//! ```bash
//! cargo run --release --example dual_head_training
//! ```

use frnet::autodiff::Tape;
use frnet::backbone::BackboneConfig;
use frnet::checkpoint;
use frnet::data::{make_synthetic, SyntheticKind, SyntheticSpec};
use frnet::model::{build_network, DualHeadNetwork, ModelConfig};
use frnet::nn::{InitSpec, Mode};
use frnet::optim::{train, OptimizerConfig, TrainSetup};

fn main() {
    // Noisy rings hidden in a 16-dimensional ambient space: a task where the
    // backbone genuinely has to learn features from 100 labels.
    let (train_ds, test_ds) = make_synthetic(&SyntheticSpec {
        kind: SyntheticKind::Rings,
        classes: 4,
        train_per_class: 25,
        test_per_class: 100,
        noise: 0.1,
        seed: 11,
        image_size: None,
        embed_dim: Some(16),
        embed_noise: 0.3,
    })
    .unwrap();

    let model = ModelConfig {
        backbone: BackboneConfig::mlp(16, vec![16], 16),
        variant: "fr_ojkd".into(),
        d_frf: 8,
        num_classes: 4,
        double_relu: false,
    };
    let net: DualHeadNetwork<f32> = build_network(&model, &InitSpec::kaiming(1)).unwrap();
    println!(
        "parameters: {} training, {} inference (+{} dropped after training)",
        net.train_param_count(),
        net.inference_param_count(),
        net.train_param_count() - net.inference_param_count()
    );

    let labeled: Vec<usize> = (0..train_ds.len()).collect();
    let setup = TrainSetup { train: &train_ds, labeled: &labeled, test: &test_ds, augment: None };
    let optim = OptimizerConfig { lr0: 0.1, epochs: 150, batch_size: 16, ..OptimizerConfig::standard(150) };
    let result = train(&net, &setup, &optim, 1).unwrap();

    println!(
        "loss: {:.3} (epoch 1) -> {:.3} (epoch {})",
        result.epoch_losses[0],
        result.epoch_losses.last().unwrap(),
        result.epoch_losses.len()
    );
    println!("deployed (original) head accuracy: {:.4}", result.accuracy_original);
    println!("refiner head accuracy:             {:.4}", result.accuracy_fr.unwrap());

    // The inference path is the original-head branch of the training
    // forward, bit for bit.
    let (batch, _) = test_ds.batch::<f32>(&[0, 1, 2, 3]);
    let infer = net.forward_infer(&batch).unwrap();
    let tape = Tape::new();
    let (train_branch, _) = net.forward_train(&tape, &batch, Mode::Eval).unwrap();
    println!("inference equals eval-mode training branch: {}", infer.bit_eq(&train_branch));

    // Checkpoint round trip is bit-exact.
    let path = std::env::temp_dir().join("dual_head_training.frck");
    checkpoint::save(&net, &model, &path).unwrap();
    let (restored, _) = checkpoint::load::<f32>(&path).unwrap();
    let all_equal = net
        .named_tensors()
        .iter()
        .zip(restored.named_tensors())
        .all(|(a, b)| a.tensor.bit_eq(&b.tensor));
    println!("checkpoint round trip bit-exact:            {all_equal}");
    std::fs::remove_file(&path).unwrap();
}
