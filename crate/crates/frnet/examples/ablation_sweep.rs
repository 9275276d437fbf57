//! Head-variant build-up: from a bare baseline through the square linear
//! layer, the dimension reduction, the un-normed MLP, the full head, the
//! gate toggle and deeper nonlinear stacks.
//!
//! ```bash
//! cargo run --release --example ablation_sweep
//! ```

use frnet::config::ExperimentConfig;
use frnet::experiment::{run_ablation, ABLATION_VARIANTS};

const CONFIG: &str = r#"
name = "ablation_sweep"
seeds = [1, 2, 3]

[dataset]
kind = "rings"
classes = 4
train_per_class = 25
test_per_class = 100
noise = 0.1
seed = 11
embed_dim = 16
embed_noise = 0.3

[backbone]
kind = "mlp"
input = { dim = 16 }
stage_widths = [16]
d_bbf = 16

[head]
variant = "fr_ojkd"
d_frf = 8

[optim]
lr0 = 0.1
momentum = 0.9
weight_decay = 5e-4
epochs = 100
batch_size = 16
"#;

fn main() {
    let out = std::env::temp_dir().join("frnet_ablation_sweep");
    let _ = std::fs::remove_dir_all(&out);
    let config: ExperimentConfig = toml::from_str(CONFIG).unwrap();

    let outcomes = run_ablation::<f32>(&config, &out, 3).unwrap();

    println!("100 labels, 3 seeds, deployed-head accuracy per variant:\n");
    println!("{:<20} {:>10} {:>10}", "variant", "mean", "std");
    for (variant, outcome) in ABLATION_VARIANTS.iter().zip(&outcomes) {
        let row = outcome
            .report
            .rows
            .iter()
            .find(|r| r.head == "original")
            .expect("original head row");
        println!("{variant:<20} {:>10.4} {:>10.4}", row.mean_acc, row.std_acc);
    }
    println!("\nmerged CSV: {}", out.join("ablate.csv").display());
}
