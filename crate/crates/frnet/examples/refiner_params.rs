//! Parameter accounting for the refiner head and its ablation variants.
//!
//! The head is cheap: at the common 512-feature backbone with a 64-wide
//! reduction and 10 classes it adds 42058 trainable scalars during training
//! and exactly zero at inference.
//!
//! ```bash
//! cargo run --release --example refiner_params
//! ```

use frnet::nn::InitSpec;
use frnet::refiner::{build_feature_refiner, FeatureRefinerConfig, FeatureRefinerHead, FrVariant};

fn main() {
    println!("full head at common backbone sizes:");
    println!("{:>7} {:>7} {:>8} {:>12} {:>12}", "d_bbf", "d_frf", "classes", "closed form", "built");
    for (d_bbf, d_frf, classes) in [(512, 64, 10), (1024, 64, 10), (512, 256, 101)] {
        let cfg = FeatureRefinerConfig::full(d_bbf, d_frf, classes);
        let head: FeatureRefinerHead<f32> =
            build_feature_refiner(&cfg, &InitSpec::kaiming(0)).unwrap();
        println!(
            "{:>7} {:>7} {:>8} {:>12} {:>12}",
            d_bbf,
            d_frf,
            classes,
            cfg.expected_param_count(),
            head.param_count()
        );
    }

    println!("\nvariants at d_bbf=512, d_frf=64, classes=10:");
    let base = FeatureRefinerConfig::full(512, 64, 10);
    for (name, variant) in [
        ("square_linear_only", FrVariant::SquareLinearOnly),
        ("reduce_only", FrVariant::ReduceOnly),
        ("no_layernorm", FrVariant::NoLayerNorm),
        ("full (k=1)", FrVariant::Full),
        ("k_nonlinear_layers(2)", FrVariant::KNonlinearLayers(2)),
        ("k_nonlinear_layers(3)", FrVariant::KNonlinearLayers(3)),
    ] {
        let cfg = base.with_variant(variant);
        println!("{name:<24} {:>12}", cfg.expected_param_count());
    }
}
