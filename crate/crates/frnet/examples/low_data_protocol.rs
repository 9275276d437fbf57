//! The incremental labeled-pool protocol: train on nested pools of growing
//! size and watch the gap between the dual-head network and its baseline.
//!
//! Every pool is drawn once per seed by incremental random sampling and
//! shared between the two variants, so the comparison is architecture-only.
//!
//! ```bash
//! cargo run --release --example low_data_protocol
//! ```

use frnet::config::ExperimentConfig;
use frnet::experiment::run_experiment;

const CONFIG: &str = r#"
name = "low_data_protocol"
seeds = [1, 2, 3]

[dataset]
kind = "rings"
classes = 4
train_per_class = 100
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

[active]
initial_pool_size = 50
budget_per_cycle = 50
num_cycles = 4
strategy = "random"
"#;

fn main() {
    let out_root = std::env::temp_dir().join("frnet_low_data_protocol");
    let _ = std::fs::remove_dir_all(&out_root);

    let mut rows = Vec::new();
    for variant in ["baseline", "fr_ojkd"] {
        let mut config: ExperimentConfig = toml::from_str(CONFIG).unwrap();
        config.head.variant = variant.to_string();
        let outcome =
            run_experiment::<f32>(&config, &out_root.join(variant), 3).unwrap();
        rows.push((variant, outcome));
    }

    println!("{:>8} {:>10} {:>22} {:>22}", "cycle", "labels", "baseline", "fr_ojkd (deployed)");
    let baseline = &rows[0].1.report;
    let fr = &rows[1].1.report;
    for row in &baseline.rows {
        let fr_row = fr
            .rows
            .iter()
            .find(|r| r.cycle == row.cycle && r.head == "original")
            .unwrap();
        println!(
            "{:>8} {:>10} {:>14.4} ± {:.4} {:>14.4} ± {:.4}",
            row.cycle, row.labeled_count, row.mean_acc, row.std_acc, fr_row.mean_acc, fr_row.std_acc
        );
    }
    println!("\nartifacts in {}", out_root.display());
}
