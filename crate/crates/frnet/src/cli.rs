//! Command-line entry point. The binary is a thin wrapper; everything here
//! is callable in-process (the CLI tests do exactly that).

use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::experiment::{run_ablation, run_experiment, ExperimentOutcome};
use crate::model::build_network;
use crate::nn::suite::{run_layer_suite, SUITE_TOLERANCE};
use crate::nn::InitSpec;
use crate::refiner::FeatureRefinerConfig;
use crate::report::{read_seed_csv, Report};

const USAGE: &str = "\
frnet — feature-refiner training and active-learning experiments

usage: frnet <command> [options]

commands:
  train        supervised runs over the configured seeds
  al           active-learning cycle experiment
  ablate       sweep head variants (baseline through fr_k3)
  report       re-aggregate run directories into mean/std tables
  gradcheck    finite-difference checks for every layer (f64)
  paramcount   training/inference parameter accounting

options:
  --config <path>      experiment TOML (train, al, ablate, paramcount)
  --seed <a,b,...>     override the config seed list
  --out <dir>          output directory (default $FRNET_OUT or ./runs, plus name)
  --strategy <name>    random | max_entropy | core_set (al)
  --variant <name>     baseline | fr_ojkd | fr_no_gate | fr_reduce_only |
                       fr_square_linear | fr_no_layernorm | fr_k<k>
  --threads <n>        fan seeds out over n threads (default 1)
  --d-bbf <n> --d-frf <n> --classes <n>
                       paramcount without a config file
";

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "FRNET_OUT";

#[derive(Debug, Default)]
struct Flags {
    config: Option<PathBuf>,
    seeds: Option<Vec<u64>>,
    out: Option<PathBuf>,
    strategy: Option<String>,
    variant: Option<String>,
    threads: usize,
    d_bbf: Option<usize>,
    d_frf: Option<usize>,
    classes: Option<usize>,
    positional: Vec<String>,
}

fn parse_flags(args: &[String]) -> std::result::Result<Flags, String> {
    let mut flags = Flags { threads: 1, ..Flags::default() };
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let mut value_of = |name: &str| {
            it.next().map(|s| s.to_string()).ok_or(format!("{name} needs a value"))
        };
        match arg.as_str() {
            "--config" => flags.config = Some(PathBuf::from(value_of("--config")?)),
            "--out" => flags.out = Some(PathBuf::from(value_of("--out")?)),
            "--strategy" => flags.strategy = Some(value_of("--strategy")?),
            "--variant" => flags.variant = Some(value_of("--variant")?),
            "--seed" => {
                let raw = value_of("--seed")?;
                let seeds: std::result::Result<Vec<u64>, _> =
                    raw.split(',').map(|s| s.trim().parse::<u64>()).collect();
                flags.seeds = Some(seeds.map_err(|_| format!("bad seed list: {raw}"))?);
            }
            "--threads" => {
                let raw = value_of("--threads")?;
                flags.threads =
                    raw.parse().map_err(|_| format!("bad thread count: {raw}"))?;
                if flags.threads == 0 {
                    return Err("--threads must be at least 1".into());
                }
            }
            "--d-bbf" => {
                flags.d_bbf =
                    Some(value_of("--d-bbf")?.parse().map_err(|_| "bad --d-bbf".to_string())?)
            }
            "--d-frf" => {
                flags.d_frf =
                    Some(value_of("--d-frf")?.parse().map_err(|_| "bad --d-frf".to_string())?)
            }
            "--classes" => {
                flags.classes =
                    Some(value_of("--classes")?.parse().map_err(|_| "bad --classes".to_string())?)
            }
            other if other.starts_with("--") => return Err(format!("unknown option {other}")),
            other => flags.positional.push(other.to_string()),
        }
    }
    Ok(flags)
}

fn load_config(flags: &Flags) -> Result<ExperimentConfig> {
    let path = flags
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("--config is required".into()))?;
    let mut config = ExperimentConfig::from_path(path)?;
    if let Some(seeds) = &flags.seeds {
        config.seeds = seeds.clone();
    }
    if let Some(variant) = &flags.variant {
        config.head.variant = variant.clone();
    }
    if let Some(strategy) = &flags.strategy {
        let parsed = crate::active::Strategy::parse(strategy)?;
        match &mut config.active {
            Some(section) => section.strategy = parsed,
            None => {
                return Err(Error::InvalidConfig(
                    "--strategy given but the config has no [active] section".into(),
                ))
            }
        }
    }
    Ok(config)
}

fn out_dir_for(config: &ExperimentConfig, flags: &Flags) -> PathBuf {
    if let Some(out) = &flags.out {
        return out.clone();
    }
    if let Some(out) = &config.out_dir {
        return out.clone();
    }
    let root = std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(&config.name)
}

fn print_outcome(outcome: &ExperimentOutcome) {
    if outcome.report.single_seed {
        eprintln!("warning: single seed; std reported as 0 by convention");
    }
    println!("run directory: {}", outcome.out_dir.display());
    println!("config hash:   {}", outcome.config_hash);
    for row in &outcome.report.rows {
        println!(
            "cycle {:>2}  labeled {:>6}  {:>8} head  acc {:.4} ± {:.4}",
            row.cycle, row.labeled_count, row.head, row.mean_acc, row.std_acc
        );
    }
}

fn cmd_train(flags: &Flags) -> Result<()> {
    let mut config = load_config(flags)?;
    // Supervised protocol regardless of any [active] section.
    config.active = None;
    let out = out_dir_for(&config, flags);
    let outcome = run_experiment::<f32>(&config, &out, flags.threads)?;
    print_outcome(&outcome);
    Ok(())
}

fn cmd_al(flags: &Flags) -> Result<()> {
    let config = load_config(flags)?;
    if config.active.is_none() {
        return Err(Error::InvalidConfig("al requires an [active] section".into()));
    }
    let out = out_dir_for(&config, flags);
    let outcome = run_experiment::<f32>(&config, &out, flags.threads)?;
    print_outcome(&outcome);
    Ok(())
}

fn cmd_ablate(flags: &Flags) -> Result<()> {
    let config = load_config(flags)?;
    let out = out_dir_for(&config, flags);
    let outcomes = run_ablation::<f32>(&config, &out, flags.threads)?;
    for outcome in &outcomes {
        print_outcome(outcome);
    }
    println!("merged table: {}", out.join("ablate.csv").display());
    Ok(())
}

fn cmd_report(flags: &Flags) -> Result<()> {
    if flags.positional.is_empty() {
        return Err(Error::InvalidConfig("report needs at least one run directory".into()));
    }
    for dir in &flags.positional {
        let dir = Path::new(dir);
        let config = ExperimentConfig::from_path(&dir.join("config_echo.toml"))?;
        let strategy = config
            .active
            .as_ref()
            .map(|a| a.strategy.name().to_string())
            .unwrap_or_else(|| "supervised".to_string());

        let mut records = Vec::new();
        for &seed in &config.seeds {
            let path = dir.join(format!("seed_{seed}")).join("cycles.csv");
            records.push(read_seed_csv(&path, seed)?);
        }
        let report = Report::from_records(
            &records,
            &config.head.variant,
            &strategy,
            &config.config_hash()?,
        )?;
        report.write_csv(&dir.join("report.csv"))?;
        if report.single_seed {
            eprintln!("warning: single seed; std reported as 0 by convention");
        }
        println!("{}:", dir.display());
        for row in &report.rows {
            println!(
                "cycle {:>2}  labeled {:>6}  {:>8} head  acc {:.4} ± {:.4}",
                row.cycle, row.labeled_count, row.head, row.mean_acc, row.std_acc
            );
        }
    }
    Ok(())
}

fn cmd_gradcheck() -> Result<()> {
    let reports = run_layer_suite(0xF00D, 20)?;
    let mut all_passed = true;
    for r in &reports {
        let status = if r.passed() { "pass" } else { "FAIL" };
        println!(
            "{:<24} {:>3} instances  max rel err {:>12.3e}  [{status}]",
            r.layer, r.instances, r.max_rel_error
        );
        all_passed &= r.passed();
    }
    if !all_passed {
        return Err(Error::InvalidConfig(format!(
            "gradient check exceeded tolerance {SUITE_TOLERANCE}"
        )));
    }
    Ok(())
}

fn cmd_paramcount(flags: &Flags) -> Result<()> {
    if let (Some(d_bbf), Some(d_frf), Some(classes)) = (flags.d_bbf, flags.d_frf, flags.classes) {
        let fr = FeatureRefinerConfig::full(d_bbf, d_frf, classes);
        fr.validate()?;
        let head: crate::refiner::FeatureRefinerHead<f32> =
            crate::refiner::build_feature_refiner(&fr, &InitSpec::kaiming(0))?;
        debug_assert_eq!(head.param_count(), fr.expected_param_count());
        println!(
            "refiner head (d_bbf={d_bbf}, d_frf={d_frf}, classes={classes}): extra training-only parameters = {}",
            head.param_count()
        );
        return Ok(());
    }
    let config = load_config(flags)?;
    let (train_ds, _test, _) = config.dataset.load()?;
    config.validate(&train_ds)?;
    let model = config.model_config(train_ds.class_count());
    let net = build_network::<f32>(&model, &InitSpec::kaiming(0))?;
    let train_count = net.train_param_count();
    let infer_count = net.inference_param_count();
    println!("variant:              {}", config.head.variant);
    println!("training parameters:  {train_count}");
    println!("inference parameters: {infer_count}");
    println!("extra during training: {} ({:.2}%)",
        train_count - infer_count,
        100.0 * (train_count - infer_count) as f64 / infer_count as f64
    );
    Ok(())
}

/// Dispatch `args` (without the binary name); returns the process exit code.
pub fn run(args: &[String]) -> i32 {
    let Some((command, rest)) = args.split_first() else {
        eprintln!("{USAGE}");
        return 2;
    };
    let flags = match parse_flags(rest) {
        Ok(f) => f,
        Err(msg) => {
            eprintln!("error: {msg}");
            eprintln!("{USAGE}");
            return 2;
        }
    };
    let result = match command.as_str() {
        "train" => cmd_train(&flags),
        "al" => cmd_al(&flags),
        "ablate" => cmd_ablate(&flags),
        "report" => cmd_report(&flags),
        "gradcheck" => cmd_gradcheck(),
        "paramcount" => cmd_paramcount(&flags),
        "help" | "--help" | "-h" => {
            println!("{USAGE}");
            return 0;
        }
        other => {
            eprintln!("error: unknown command {other}");
            eprintln!("{USAGE}");
            return 2;
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
