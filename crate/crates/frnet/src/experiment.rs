//! End-to-end experiment execution: materialize the dataset, run the
//! supervised or active-learning protocol over all seeds, and write the run
//! directory (config echo, per-seed cycle CSVs, pool snapshots, report).
//!
//! The supervised protocol is the single-cycle special case of the
//! active-learning loop with the whole training split as the initial pool,
//! so both paths share one runner.

use std::path::{Path, PathBuf};

use crate::active::{run_al_experiment, ALConfig, ScoreHead, SeedRecords, Strategy};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{write_seed_csv, Report};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub records: Vec<SeedRecords>,
    pub report: Report,
    pub out_dir: PathBuf,
    pub config_hash: String,
}

/// Supervised protocol when no `[active]` section applies, cycle experiment
/// otherwise. `threads` fans seeds out over OS threads; results and
/// artifacts are identical for any thread count.
pub fn run_experiment<S: Scalar>(
    config: &ExperimentConfig,
    out_dir: &Path,
    threads: usize,
) -> Result<ExperimentOutcome> {
    let (train_ds, test_ds, stored_stats) = config.dataset.load()?;
    config.validate(&train_ds)?;
    let augment = config.augment_spec(&train_ds, stored_stats)?;
    let model = config.model_config(train_ds.class_count());
    let config_hash = config.config_hash()?;

    let (al, strategy_name): (ALConfig, String) = match &config.active {
        Some(section) => (config.al_config(section)?, section.strategy.name().to_string()),
        None => (
            // Supervised: one cycle on the full training split.
            ALConfig {
                initial_pool_size: train_ds.len(),
                budget_per_cycle: 0,
                num_cycles: 1,
                strategy: Strategy::Random,
                seeds: config.seeds.clone(),
                score_head: ScoreHead::default(),
            },
            "supervised".to_string(),
        ),
    };

    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("config_echo.toml"), config.canonical_toml()?)?;
    std::fs::write(
        out_dir.join("provenance.txt"),
        format!(
            "config_hash = {config_hash}\ncode_version = {}\n",
            env!("CARGO_PKG_VERSION")
        ),
    )?;

    let records = run_al_experiment::<S>(
        &model,
        &config.optim,
        &al,
        &train_ds,
        &test_ds,
        augment.as_ref(),
        Some(out_dir),
        threads,
    )?;

    for seed_records in &records {
        let seed_dir = out_dir.join(format!("seed_{}", seed_records.seed));
        write_seed_csv(&seed_dir.join("cycles.csv"), seed_records)?;
    }

    let report = Report::from_records(&records, &config.head.variant, &strategy_name, &config_hash)?;
    report.write_csv(&out_dir.join("report.csv"))?;

    Ok(ExperimentOutcome { records, report, out_dir: out_dir.to_path_buf(), config_hash })
}

/// The head variants swept by the `ablate` subcommand: the build-up sequence
/// (square linear, reduction, no-norm MLP, full head), the gate toggle, and
/// deeper nonlinear stacks.
pub const ABLATION_VARIANTS: [&str; 8] = [
    "baseline",
    "fr_square_linear",
    "fr_reduce_only",
    "fr_no_layernorm",
    "fr_ojkd",
    "fr_no_gate",
    "fr_k2",
    "fr_k3",
];

/// Run the variant sweep; each variant lands in `<out>/<variant>/` and the
/// merged table in `<out>/ablate.csv`.
pub fn run_ablation<S: Scalar>(
    config: &ExperimentConfig,
    out_dir: &Path,
    threads: usize,
) -> Result<Vec<ExperimentOutcome>> {
    let mut outcomes = Vec::with_capacity(ABLATION_VARIANTS.len());
    for variant in ABLATION_VARIANTS {
        let mut variant_config = config.clone();
        variant_config.head.variant = variant.to_string();
        let outcome =
            run_experiment::<S>(&variant_config, &out_dir.join(variant), threads)?;
        outcomes.push(outcome);
    }
    let mut merged = String::from(crate::report::REPORT_HEADER);
    merged.push('\n');
    for outcome in &outcomes {
        for line in outcome.report.to_csv().lines().skip(1) {
            merged.push_str(line);
            merged.push('\n');
        }
    }
    std::fs::write(out_dir.join("ablate.csv"), merged)?;
    Ok(outcomes)
}
