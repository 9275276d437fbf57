//! Dataset persistence and the augmentation pipeline.
//!
//! Writes a rendered synthetic dataset in both supported formats (single
//! binary file; directory with manifest), reloads them bit-exactly, and
//! pushes one image through flip / pad-crop / standardize.
//!
//! ```bash
//! cargo run --release --example dataset_io
//! ```

use frnet::data::{
    augment, compute_channel_stats, load_image_dataset, make_synthetic, save_dataset_binary,
    save_dataset_dir, AugmentSpec, DatasetFormat, SyntheticKind, SyntheticSpec,
};
use frnet::rng::Rng;

fn main() {
    let (train, _test) = make_synthetic(&SyntheticSpec {
        kind: SyntheticKind::Blobs,
        classes: 4,
        train_per_class: 8,
        test_per_class: 2,
        noise: 0.2,
        seed: 3,
        image_size: Some(8),
        embed_dim: None,
        embed_noise: 0.0,
    })
    .unwrap();
    println!("dataset: {} samples, shape {:?}", train.len(), train.shape());

    let dir = std::env::temp_dir().join("frnet_dataset_io");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();

    // Single binary file.
    let binary_path = dir.join("train.frds");
    save_dataset_binary(&train, &binary_path).unwrap();
    let (loaded, _) = load_image_dataset(&binary_path, DatasetFormat::Binary).unwrap();
    let bit_exact = loaded
        .values()
        .iter()
        .zip(train.values())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    println!(
        "binary file: {} bytes, reload bit-exact: {bit_exact}",
        std::fs::metadata(&binary_path).unwrap().len()
    );

    // Directory with manifest, carrying the channel statistics.
    let stats = compute_channel_stats(&train);
    let dir_path = dir.join("train_dir");
    save_dataset_dir(&train, &dir_path, Some(&stats)).unwrap();
    let (_reloaded, restored_stats) = load_image_dataset(&dir_path, DatasetFormat::Dir).unwrap();
    println!(
        "directory format: manifest stats restored: {}",
        restored_stats.as_ref() == Some(&stats)
    );

    // One augmented sample: flip with probability 1/2, pad by 1, crop 8x8,
    // standardize per channel.
    let spec = AugmentSpec {
        hflip: true,
        crop_size: (8, 8),
        crop_padding: 1,
        normalize: Some(stats),
    };
    let mut rng = Rng::new(42);
    let augmented = augment(train.sample(0), 1, 8, 8, &spec, &mut rng);
    let mean: f32 = augmented.iter().sum::<f32>() / augmented.len() as f32;
    println!("augmented sample: {} values, mean {mean:.3} after standardization", augmented.len());

    // The eval-time counterpart keeps only the normalization.
    let eval_spec = spec.eval_transform();
    println!(
        "eval transform: hflip={}, padding={}, normalized={}",
        eval_spec.hflip,
        eval_spec.crop_padding,
        eval_spec.normalize.is_some()
    );
    let _ = std::fs::remove_dir_all(&dir);
}
