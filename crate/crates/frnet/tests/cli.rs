//! End-to-end command-line surface tests, run in-process through
//! `frnet::cli::run`.

use std::path::PathBuf;

fn args(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

fn fresh_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("frnet_cli_{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const CONFIG: &str = r#"
name = "cli_demo"
seeds = [1, 2]

[dataset]
kind = "blobs"
classes = 3
train_per_class = 20
test_per_class = 10
noise = 0.4
seed = 9

[backbone]
kind = "mlp"
input = { dim = 2 }
stage_widths = [8]
d_bbf = 8

[head]
variant = "fr_ojkd"
d_frf = 4

[optim]
lr0 = 0.05
momentum = 0.9
weight_decay = 5e-4
epochs = 4
batch_size = 8

[active]
initial_pool_size = 10
budget_per_cycle = 10
num_cycles = 2
strategy = "max_entropy"
"#;

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(frnet::cli::run(&args(&["definitely_not_a_command"])), 2);
    assert_eq!(frnet::cli::run(&[]), 2);
}

#[test]
fn help_exits_0() {
    assert_eq!(frnet::cli::run(&args(&["help"])), 0);
}

#[test]
fn paramcount_flags_report_the_refiner_head() {
    assert_eq!(
        frnet::cli::run(&args(&[
            "paramcount", "--d-bbf", "512", "--d-frf", "64", "--classes", "10"
        ])),
        0
    );
}

#[test]
fn missing_config_is_a_runtime_error() {
    assert_eq!(frnet::cli::run(&args(&["train", "--config", "/nonexistent/x.toml"])), 1);
}

#[test]
fn bad_flag_exits_2() {
    assert_eq!(frnet::cli::run(&args(&["train", "--frobnicate"])), 2);
    assert_eq!(frnet::cli::run(&args(&["train", "--seed", "one,two"])), 2);
}

#[test]
fn gradcheck_passes() {
    assert_eq!(frnet::cli::run(&args(&["gradcheck"])), 0);
}

#[test]
fn train_then_report_round_trip() {
    let dir = fresh_dir("train_report");
    let config_path = dir.join("exp.toml");
    std::fs::write(&config_path, CONFIG).unwrap();
    let out = dir.join("run");

    let code = frnet::cli::run(&args(&[
        "train",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code, 0);

    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(
        lines.next().unwrap(),
        "cycle,labeled_count,mean_acc,std_acc,head,variant,strategy,config_hash"
    );
    // Supervised run: one cycle, two heads.
    assert_eq!(lines.count(), 2);

    // Re-aggregating the artifacts must be byte-idempotent.
    let before = std::fs::read(out.join("report.csv")).unwrap();
    let code = frnet::cli::run(&args(&["report", out.to_str().unwrap()]));
    assert_eq!(code, 0);
    let after = std::fs::read(out.join("report.csv")).unwrap();
    assert_eq!(before, after);

    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn al_run_emits_cycles_and_pool_snapshots() {
    let dir = fresh_dir("al");
    let config_path = dir.join("exp.toml");
    std::fs::write(&config_path, CONFIG).unwrap();
    let out = dir.join("run");

    let code = frnet::cli::run(&args(&[
        "al",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "2",
    ]));
    assert_eq!(code, 0);

    for seed in [1, 2] {
        assert!(out.join(format!("seed_{seed}/cycles.csv")).exists());
        assert!(out.join(format!("seed_{seed}/labeled_cycle_000.txt")).exists());
        assert!(out.join(format!("seed_{seed}/labeled_cycle_001.txt")).exists());
    }
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    // 2 cycles x 2 heads + header.
    assert_eq!(report.lines().count(), 5);
    assert!(report.contains("max_entropy"));

    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn strategy_override_changes_the_report() {
    let dir = fresh_dir("strategy_override");
    let config_path = dir.join("exp.toml");
    std::fs::write(&config_path, CONFIG).unwrap();
    let out = dir.join("run");

    let code = frnet::cli::run(&args(&[
        "al",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--strategy",
        "core_set",
    ]));
    assert_eq!(code, 0);
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.contains("core_set"));

    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn infeasible_pool_is_a_clean_failure() {
    let dir = fresh_dir("infeasible");
    let config_path = dir.join("exp.toml");
    // 60 train samples cannot support 50 + 2 x 20.
    let bad = CONFIG
        .replace("initial_pool_size = 10", "initial_pool_size = 50")
        .replace("budget_per_cycle = 10", "budget_per_cycle = 20");
    std::fs::write(&config_path, bad).unwrap();
    let out = dir.join("run");
    let code = frnet::cli::run(&args(&[
        "al",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code, 1);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn variant_override_runs_the_baseline() {
    let dir = fresh_dir("variant_override");
    let config_path = dir.join("exp.toml");
    std::fs::write(&config_path, CONFIG).unwrap();
    let out = dir.join("run");

    let code = frnet::cli::run(&args(&[
        "train",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--variant",
        "baseline",
        "--seed",
        "7",
    ]));
    assert_eq!(code, 0);
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.contains("baseline"));
    // Baseline has no refiner head: one row only.
    assert_eq!(report.lines().count(), 2);
    assert!(out.join("seed_7/cycles.csv").exists());

    std::fs::remove_dir_all(&dir).unwrap();
}
