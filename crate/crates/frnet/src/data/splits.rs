//! Predefined nested labeled-pool schedules, built by incremental random
//! sampling and persisted as plain-text index lists so every strategy and
//! baseline can train on exactly the same splits; plus a stratified
//! train/test splitter for datasets without an official test split.

use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::{Dataset, SplitTag};

/// `cycles[k]` is the labeled index list for cycle `k`; each entry extends
/// the previous one by exactly the per-cycle budget, in draw order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSchedule {
    pub cycles: Vec<Vec<usize>>,
}

/// Incremental random sampling: cycle 0 draws `initial_size` indices, every
/// later cycle appends `budget` fresh ones. Pure function of the arguments.
pub fn make_initial_splits(
    dataset_len: usize,
    initial_size: usize,
    num_cycles: usize,
    budget: usize,
    seed: u64,
) -> Result<SplitSchedule> {
    if num_cycles == 0 || initial_size == 0 {
        return Err(Error::InvalidConfig("need at least one cycle and a nonempty pool".into()));
    }
    let largest = initial_size + (num_cycles - 1) * budget;
    if largest > dataset_len {
        return Err(Error::InfeasiblePool(format!(
            "schedule needs {largest} indices, dataset has {dataset_len}"
        )));
    }
    let mut rng = Rng::derived(seed, 0x5911_7300);
    let all: Vec<usize> = (0..dataset_len).collect();
    // One shuffled permutation; nested prefixes give the incremental draws.
    let order = rng.sample_without_replacement(&all, largest);
    let mut cycles = Vec::with_capacity(num_cycles);
    for k in 0..num_cycles {
        cycles.push(order[..initial_size + k * budget].to_vec());
    }
    Ok(SplitSchedule { cycles })
}

impl SplitSchedule {
    pub fn num_cycles(&self) -> usize {
        self.cycles.len()
    }

    /// Write one `cycle_###.txt` per cycle, one index per line.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (k, indices) in self.cycles.iter().enumerate() {
            write_index_list(&dir.join(format!("cycle_{k:03}.txt")), indices)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<SplitSchedule> {
        let mut cycles = Vec::new();
        loop {
            let path = dir.join(format!("cycle_{:03}.txt", cycles.len()));
            if !path.exists() {
                break;
            }
            cycles.push(read_index_list(&path)?);
        }
        if cycles.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "no cycle_###.txt files under {}",
                dir.display()
            )));
        }
        Ok(SplitSchedule { cycles })
    }
}

/// Split a dataset into train/test parts per class, maintaining the class
/// distribution: each class contributes `round(train_fraction * count)`
/// samples to the train side (at least one on each side where possible).
pub fn stratified_split(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(0.0 < train_fraction && train_fraction < 1.0) {
        return Err(Error::InvalidConfig("train_fraction must be in (0, 1)".into()));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.class_count()];
    for i in 0..dataset.len() {
        per_class[dataset.label(i)].push(i);
    }
    let mut rng = Rng::derived(seed, 0x57a7_1f1e);
    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for indices in per_class.iter_mut() {
        if indices.is_empty() {
            continue;
        }
        rng.shuffle(indices);
        let mut n_train = (train_fraction * indices.len() as f64).round() as usize;
        n_train = n_train.clamp(1.min(indices.len()), indices.len().saturating_sub(1).max(1));
        train_indices.extend_from_slice(&indices[..n_train]);
        test_indices.extend_from_slice(&indices[n_train..]);
    }
    if test_indices.is_empty() {
        return Err(Error::InfeasiblePool("stratified split left the test side empty".into()));
    }
    let gather = |picks: &[usize], split: SplitTag| {
        let d = dataset.sample_dim();
        let mut values = Vec::with_capacity(picks.len() * d);
        let mut labels = Vec::with_capacity(picks.len());
        for &i in picks {
            values.extend_from_slice(dataset.sample(i));
            labels.push(dataset.label(i));
        }
        Dataset::new(values, dataset.shape(), labels, dataset.class_count(), split)
    };
    Ok((gather(&train_indices, SplitTag::Train)?, gather(&test_indices, SplitTag::Test)?))
}

/// One index per line, in order.
pub fn write_index_list(path: &Path, indices: &[usize]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = String::with_capacity(indices.len() * 7);
    for i in indices {
        out.push_str(&i.to_string());
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_index_list(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim().parse::<usize>().map_err(|e| Error::ValidationFailed {
                path: path.to_path_buf(),
                detail: format!("bad index line {l:?}: {e}"),
            })
        })
        .collect()
}
