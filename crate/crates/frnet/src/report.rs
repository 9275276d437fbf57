//! Aggregation of per-seed results into mean/std tables, and the CSV
//! artifacts experiments leave behind.
//!
//! Reports are pure functions of the run artifacts: re-aggregating the same
//! seed files produces byte-identical CSV output. Wall-clock never appears
//! in any artifact.

use std::path::Path;

use crate::active::{CycleRecord, SeedRecords};
use crate::error::{Error, Result};

/// Column-wise mean and sample (n-1) standard deviation of a seed-major
/// accuracy matrix. A single seed yields std 0 by convention, flagged via
/// the second return.
pub fn aggregate(matrix: &[Vec<f64>]) -> Result<(Vec<(f64, f64)>, bool)> {
    if matrix.is_empty() {
        return Err(Error::InvalidConfig("empty accuracy matrix".into()));
    }
    let cols = matrix[0].len();
    if matrix.iter().any(|row| row.len() != cols) {
        return Err(Error::InvalidConfig("ragged accuracy matrix".into()));
    }
    let n = matrix.len();
    let degenerate = n == 1;
    let mut out = Vec::with_capacity(cols);
    for c in 0..cols {
        // A constant column has definitionally zero spread; short-circuit so
        // rounding in the mean cannot manufacture a tiny std.
        if matrix.iter().all(|row| row[c] == matrix[0][c]) {
            out.push((matrix[0][c], 0.0));
            continue;
        }
        let mean = matrix.iter().map(|row| row[c]).sum::<f64>() / n as f64;
        let std = if n > 1 {
            let ss: f64 = matrix.iter().map(|row| (row[c] - mean) * (row[c] - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        out.push((mean, std));
    }
    Ok((out, degenerate))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub cycle: usize,
    pub labeled_count: usize,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub head: &'static str,
    pub variant: String,
    pub strategy: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    /// True when only one seed contributed, making std 0 by convention.
    pub single_seed: bool,
}

pub const REPORT_HEADER: &str =
    "cycle,labeled_count,mean_acc,std_acc,head,variant,strategy,config_hash";

impl Report {
    /// Build the per-cycle mean/std table from per-seed records. Emits one
    /// row per cycle for the original head, plus one per cycle for the
    /// refiner head when dual-head evaluation ran.
    pub fn from_records(
        records: &[SeedRecords],
        variant: &str,
        strategy: &str,
        config_hash: &str,
    ) -> Result<Report> {
        if records.is_empty() {
            return Err(Error::InvalidConfig("no seed records to aggregate".into()));
        }
        let cycles = records[0].cycles.len();
        if records.iter().any(|r| r.cycles.len() != cycles) {
            return Err(Error::InvalidConfig("seed records disagree on cycle count".into()));
        }

        let original: Vec<Vec<f64>> = records
            .iter()
            .map(|r| r.cycles.iter().map(|c| c.accuracy_original).collect())
            .collect();
        let (orig_stats, single_seed) = aggregate(&original)?;

        let has_fr = records[0].cycles.iter().all(|c| c.accuracy_fr.is_some());
        let fr_stats = if has_fr {
            let fr: Vec<Vec<f64>> = records
                .iter()
                .map(|r| r.cycles.iter().map(|c| c.accuracy_fr.unwrap()).collect())
                .collect();
            Some(aggregate(&fr)?.0)
        } else {
            None
        };

        let mut rows = Vec::with_capacity(cycles * 2);
        for k in 0..cycles {
            let labeled_count = records[0].cycles[k].labeled_count;
            rows.push(ReportRow {
                cycle: k,
                labeled_count,
                mean_acc: orig_stats[k].0,
                std_acc: orig_stats[k].1,
                head: "original",
                variant: variant.to_string(),
                strategy: strategy.to_string(),
                config_hash: config_hash.to_string(),
            });
            if let Some(fr) = &fr_stats {
                rows.push(ReportRow {
                    cycle: k,
                    labeled_count,
                    mean_acc: fr[k].0,
                    std_acc: fr[k].1,
                    head: "fr",
                    variant: variant.to_string(),
                    strategy: strategy.to_string(),
                    config_hash: config_hash.to_string(),
                });
            }
        }
        Ok(Report { rows, single_seed })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{},{},{},{}\n",
                r.cycle,
                r.labeled_count,
                r.mean_acc,
                r.std_acc,
                r.head,
                r.variant,
                r.strategy,
                r.config_hash
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

const SEED_HEADER: &str = "cycle,labeled_count,acc_original,acc_fr,init_hash,trained_hash";

/// Per-seed cycle artifact. Accuracies use the shortest round-trip float
/// form so re-aggregation sees exactly the values the run produced.
pub fn write_seed_csv(path: &Path, records: &SeedRecords) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = String::from(SEED_HEADER);
    out.push('\n');
    for c in &records.cycles {
        let fr = c.accuracy_fr.map(|v| format!("{v}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{:016x},{:016x}\n",
            c.cycle, c.labeled_count, c.accuracy_original, fr, c.init_hash, c.trained_hash
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parse a per-seed artifact back into records (the `report` subcommand's
/// input path).
pub fn read_seed_csv(path: &Path, seed: u64) -> Result<SeedRecords> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SEED_HEADER => {}
        other => {
            return Err(Error::ValidationFailed {
                path: path.to_path_buf(),
                detail: format!("unexpected header {other:?}"),
            })
        }
    }
    let mut cycles = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::ValidationFailed {
                path: path.to_path_buf(),
                detail: format!("bad row: {line:?}"),
            });
        }
        let parse_err = |what: &str| Error::ValidationFailed {
            path: path.to_path_buf(),
            detail: format!("bad {what} in row {line:?}"),
        };
        cycles.push(CycleRecord {
            cycle: fields[0].parse().map_err(|_| parse_err("cycle"))?,
            labeled_count: fields[1].parse().map_err(|_| parse_err("labeled_count"))?,
            accuracy_original: fields[2].parse().map_err(|_| parse_err("acc_original"))?,
            accuracy_fr: if fields[3].is_empty() {
                None
            } else {
                Some(fields[3].parse().map_err(|_| parse_err("acc_fr"))?)
            },
            init_hash: u64::from_str_radix(fields[4], 16).map_err(|_| parse_err("init_hash"))?,
            trained_hash: u64::from_str_radix(fields[5], 16)
                .map_err(|_| parse_err("trained_hash"))?,
        });
    }
    Ok(SeedRecords { seed, cycles })
}
