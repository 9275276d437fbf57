//! Cycle-based active learning: pool management, acquisition scoring
//! (random, maximum predictive entropy, greedy k-center coverage) and
//! per-cycle retraining from freshly initialized weights.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::checkpoint::checkpoint_hash;
use crate::data::{make_initial_splits, write_index_list, AugmentSpec, Dataset};
use crate::error::{Error, Result};
use crate::model::{build_network, DualHeadNetwork, ModelConfig};
use crate::nn::{InitScheme, InitSpec, Mode};
use crate::optim::{train, OptimizerConfig, TrainSetup};
use crate::rng::{substream, Rng};
use crate::scalar::Scalar;

/// Disjoint partition of the training indices. `labeled` keeps acquisition
/// order; `unlabeled` keeps dataset order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pool {
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
}

impl Pool {
    pub fn from_initial(dataset_len: usize, labeled: &[usize]) -> Result<Self> {
        let mut in_labeled = vec![false; dataset_len];
        for &i in labeled {
            if i >= dataset_len {
                return Err(Error::InfeasiblePool(format!(
                    "index {i} outside dataset of {dataset_len}"
                )));
            }
            if std::mem::replace(&mut in_labeled[i], true) {
                return Err(Error::InfeasiblePool(format!("duplicate labeled index {i}")));
            }
        }
        let unlabeled = (0..dataset_len).filter(|i| !in_labeled[*i]).collect();
        Ok(Pool { labeled: labeled.to_vec(), unlabeled })
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    /// Move `picks` from the unlabeled to the labeled side, preserving pick
    /// order. Every pick must currently be unlabeled.
    pub fn acquire_indices(&mut self, picks: &[usize]) -> Result<()> {
        let mut picked = std::collections::HashSet::with_capacity(picks.len());
        for &p in picks {
            if !picked.insert(p) {
                return Err(Error::InfeasiblePool(format!("duplicate acquisition of {p}")));
            }
        }
        let before = self.unlabeled.len();
        self.unlabeled.retain(|i| !picked.contains(i));
        if before - self.unlabeled.len() != picks.len() {
            return Err(Error::InfeasiblePool(
                "acquisition picked an index that was not unlabeled".into(),
            ));
        }
        self.labeled.extend_from_slice(picks);
        Ok(())
    }

    /// Partition invariant: labeled and unlabeled are disjoint and together
    /// cover `0..dataset_len` exactly.
    pub fn validate(&self, dataset_len: usize) -> Result<()> {
        let mut seen = vec![0u8; dataset_len];
        for &i in self.labeled.iter().chain(&self.unlabeled) {
            if i >= dataset_len {
                return Err(Error::InfeasiblePool(format!("index {i} out of range")));
            }
            seen[i] += 1;
        }
        if self.labeled.len() + self.unlabeled.len() != dataset_len
            || seen.iter().any(|c| *c != 1)
        {
            return Err(Error::InfeasiblePool("labeled/unlabeled do not partition the dataset".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    MaxEntropy,
    CoreSet,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::MaxEntropy => "max_entropy",
            Strategy::CoreSet => "core_set",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "random" => Ok(Strategy::Random),
            "max_entropy" => Ok(Strategy::MaxEntropy),
            "core_set" => Ok(Strategy::CoreSet),
            other => Err(Error::InvalidConfig(format!("unknown strategy: {other}"))),
        }
    }
}

/// Which head scores entropy acquisition. The deployed architecture is the
/// original head, so that is the default; the refiner head stays available
/// for study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScoreHead {
    #[default]
    Original,
    Fr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ALConfig {
    pub initial_pool_size: usize,
    pub budget_per_cycle: usize,
    pub num_cycles: usize,
    pub strategy: Strategy,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub score_head: ScoreHead,
}

impl ALConfig {
    pub fn validate(&self, dataset_len: usize) -> Result<()> {
        if self.num_cycles == 0 || self.initial_pool_size == 0 {
            return Err(Error::InvalidConfig("need at least one cycle and a nonempty pool".into()));
        }
        if self.initial_pool_size + self.num_cycles * self.budget_per_cycle > dataset_len {
            return Err(Error::InfeasiblePool(format!(
                "{} + {} cycles x {} exceeds dataset of {dataset_len}",
                self.initial_pool_size, self.num_cycles, self.budget_per_cycle
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must be nonempty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::InvalidConfig("seeds must be distinct".into()));
        }
        Ok(())
    }
}

/// Shannon entropy per probability row, nats. `0 ln 0` counts as zero, so
/// one-hot rows score exactly 0 and the uniform row scores `ln C`. Rows must
/// sum to 1 within 1e-5 with nonnegative entries.
pub fn entropy_scores(probs: &[f64], classes: usize) -> Result<Vec<f64>> {
    if classes == 0 || !probs.len().is_multiple_of(classes) {
        return Err(Error::InvalidConfig(format!(
            "{} probabilities do not tile rows of {classes}",
            probs.len()
        )));
    }
    let max_entropy = (classes as f64).ln();
    probs
        .chunks_exact(classes)
        .enumerate()
        .map(|(row, p)| {
            if let Some(neg) = p.iter().find(|v| **v < 0.0) {
                return Err(Error::InvalidProbabilityRow {
                    row,
                    detail: format!("negative entry {neg}"),
                });
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-5 {
                return Err(Error::InvalidProbabilityRow {
                    row,
                    detail: format!("sums to {sum}"),
                });
            }
            let h: f64 = -p.iter().map(|v| if *v > 0.0 { v * v.ln() } else { 0.0 }).sum::<f64>();
            // Guard the uniform corner against float overshoot (~1e-16).
            Ok(h.clamp(0.0, max_entropy))
        })
        .collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Greedy k-center (farthest-first) selection over Euclidean feature space.
///
/// Each round picks the unlabeled point with the largest distance to its
/// nearest covered point (labeled plus earlier picks), lowest index on ties.
/// An empty labeled set is bootstrapped with the unlabeled centroid as a
/// virtual covered point. Returns positions into `unlabeled`, in pick order.
pub fn coreset_select(
    labeled: &[f64],
    unlabeled: &[f64],
    dim: usize,
    budget: usize,
) -> Result<Vec<usize>> {
    if dim == 0 || !labeled.len().is_multiple_of(dim) || !unlabeled.len().is_multiple_of(dim) {
        return Err(Error::InvalidConfig("features do not tile the given dimension".into()));
    }
    let n_unlabeled = unlabeled.len() / dim;
    if budget > n_unlabeled {
        return Err(Error::InfeasiblePool(format!(
            "budget {budget} exceeds {n_unlabeled} unlabeled points"
        )));
    }
    let urow = |i: usize| &unlabeled[i * dim..(i + 1) * dim];

    let mut min_d2: Vec<f64> = if labeled.is_empty() {
        let mut centroid = vec![0.0f64; dim];
        for i in 0..n_unlabeled {
            for (c, v) in centroid.iter_mut().zip(urow(i)) {
                *c += *v;
            }
        }
        for c in &mut centroid {
            *c /= n_unlabeled as f64;
        }
        (0..n_unlabeled).map(|i| dist2(urow(i), &centroid)).collect()
    } else {
        (0..n_unlabeled)
            .map(|i| {
                labeled
                    .chunks_exact(dim)
                    .map(|l| dist2(urow(i), l))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    };

    let mut taken = vec![false; n_unlabeled];
    let mut picks = Vec::with_capacity(budget);
    for _ in 0..budget {
        let mut best: Option<usize> = None;
        for i in 0..n_unlabeled {
            if taken[i] {
                continue;
            }
            match best {
                None => best = Some(i),
                Some(b) if min_d2[i] > min_d2[b] => best = Some(i),
                _ => {}
            }
        }
        let pick = best.expect("budget <= unlabeled count");
        taken[pick] = true;
        picks.push(pick);
        for i in 0..n_unlabeled {
            if taken[i] {
                continue;
            }
            let d = dist2(urow(i), urow(pick));
            if d < min_d2[i] {
                min_d2[i] = d;
            }
        }
    }
    Ok(picks)
}

const ACQUIRE_TAG: u64 = 0x00ac_0001;

/// Backbone features (eval mode, no recording) for the given indices.
fn backbone_features<S: Scalar>(
    net: &DualHeadNetwork<S>,
    dataset: &Dataset,
    indices: &[usize],
    transform: Option<&AugmentSpec>,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(indices.len() * net.backbone.d_bbf());
    for chunk in indices.chunks(256) {
        let (batch, _) = batch_eval::<S>(dataset, chunk, transform);
        let tape = crate::autodiff::Tape::inference();
        let features = net.backbone.forward(&tape, &batch, Mode::Eval)?;
        out.extend(features.data().iter().map(|v| v.to_f64()));
    }
    Ok(out)
}

fn batch_eval<S: Scalar>(
    dataset: &Dataset,
    indices: &[usize],
    transform: Option<&AugmentSpec>,
) -> (crate::autodiff::Tensor<S>, Vec<usize>) {
    match (transform, dataset.shape()) {
        (Some(spec), crate::backbone::InputShape::Image { channels, height, width }) => dataset
            .batch_with(indices, |idx, raw| {
                let mut rng = Rng::derived(0, idx as u64);
                crate::data::augment(raw, channels, height, width, spec, &mut rng)
            }),
        _ => dataset.batch(indices),
    }
}

/// Score the unlabeled pool and return the `budget` dataset indices to label
/// next, in selection order. Ties break toward the lowest dataset index.
#[allow(clippy::too_many_arguments)]
pub fn acquire<S: Scalar>(
    net: &DualHeadNetwork<S>,
    pool: &Pool,
    dataset: &Dataset,
    transform: Option<&AugmentSpec>,
    strategy: Strategy,
    budget: usize,
    seed: u64,
    score_head: ScoreHead,
) -> Result<Vec<usize>> {
    if budget > pool.unlabeled().len() {
        return Err(Error::InfeasiblePool(format!(
            "budget {budget} exceeds unlabeled pool of {}",
            pool.unlabeled().len()
        )));
    }
    match strategy {
        Strategy::Random => {
            let mut rng = Rng::new(substream(seed, ACQUIRE_TAG));
            Ok(rng.sample_without_replacement(pool.unlabeled(), budget))
        }
        Strategy::MaxEntropy => {
            let classes = net.num_classes();
            let mut logits = Vec::with_capacity(pool.unlabeled().len() * classes);
            for chunk in pool.unlabeled().chunks(256) {
                let (batch, _) = batch_eval::<S>(dataset, chunk, transform);
                let l = match score_head {
                    ScoreHead::Original => net.forward_infer(&batch)?,
                    ScoreHead::Fr => net.forward_fr_eval(&batch)?.ok_or_else(|| {
                        Error::InvalidConfig("fr score head requested on a baseline network".into())
                    })?,
                };
                logits.extend(l.data().iter().map(|v| v.to_f64()));
            }
            let probs = crate::autodiff::softmax_rows(&logits, classes);
            let scores = entropy_scores(&probs, classes)?;
            let mut ranked: Vec<(usize, f64)> = pool
                .unlabeled()
                .iter()
                .copied()
                .zip(scores)
                .collect();
            ranked.sort_by(|a, b| {
                b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0))
            });
            Ok(ranked.into_iter().take(budget).map(|(i, _)| i).collect())
        }
        Strategy::CoreSet => {
            let labeled_features = backbone_features(net, dataset, pool.labeled(), transform)?;
            let unlabeled_features = backbone_features(net, dataset, pool.unlabeled(), transform)?;
            let picks = coreset_select(
                &labeled_features,
                &unlabeled_features,
                net.backbone.d_bbf(),
                budget,
            )?;
            Ok(picks.into_iter().map(|p| pool.unlabeled()[p]).collect())
        }
    }
}

/// One cycle's outcome for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    pub labeled_count: usize,
    pub accuracy_original: f64,
    pub accuracy_fr: Option<f64>,
    /// Fingerprint of the freshly initialized weights for this cycle.
    pub init_hash: u64,
    /// Fingerprint of the trained weights.
    pub trained_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRecords {
    pub seed: u64,
    pub cycles: Vec<CycleRecord>,
}

const INIT_TAG: u64 = 0x0001_1001;
const TRAIN_TAG: u64 = 0x0001_2002;
const CYCLE_ACQ_TAG: u64 = 0x0001_3003;

/// Run the full cycle experiment for one seed.
///
/// The initial labeled pool comes from the predefined nested schedule built
/// from `seed`, so every strategy (and the baseline comparator) starts from
/// the same split. The random strategy follows that schedule exactly — the
/// supervised protocol is the random special case — while entropy and
/// core-set acquire from the trained model. Weights are reinitialized from a
/// cycle-dependent (strategy-independent) seed at the start of every cycle.
#[allow(clippy::too_many_arguments)]
pub fn run_al_seed<S: Scalar>(
    model: &ModelConfig,
    optim: &OptimizerConfig,
    al: &ALConfig,
    train_ds: &Dataset,
    test_ds: &Dataset,
    augment: Option<&AugmentSpec>,
    seed: u64,
    artifact_dir: Option<&Path>,
) -> Result<SeedRecords> {
    al.validate(train_ds.len())?;
    let schedule = make_initial_splits(
        train_ds.len(),
        al.initial_pool_size,
        al.num_cycles,
        al.budget_per_cycle,
        seed,
    )?;
    let mut pool = Pool::from_initial(train_ds.len(), &schedule.cycles[0])?;
    let eval_spec = augment.map(|a| a.eval_transform());
    let mut cycles = Vec::with_capacity(al.num_cycles);

    for cycle in 0..al.num_cycles {
        pool.validate(train_ds.len())?;
        let expected = al.initial_pool_size + cycle * al.budget_per_cycle;
        if pool.labeled().len() != expected {
            return Err(Error::InfeasiblePool(format!(
                "cycle {cycle}: labeled pool is {}, expected {expected}",
                pool.labeled().len()
            )));
        }

        let init_seed = substream(substream(seed, INIT_TAG), cycle as u64);
        let net: DualHeadNetwork<S> =
            build_network(model, &InitSpec::new(InitScheme::KaimingUniform, init_seed))?;
        let init_hash = checkpoint_hash(&net, model)?;

        let setup = TrainSetup {
            train: train_ds,
            labeled: pool.labeled(),
            test: test_ds,
            augment,
        };
        let train_seed = substream(substream(seed, TRAIN_TAG), cycle as u64);
        let result = train(&net, &setup, optim, train_seed)?;
        let trained_hash = checkpoint_hash(&net, model)?;
        let (accuracy_original, accuracy_fr) = (result.accuracy_original, result.accuracy_fr);

        if let Some(dir) = artifact_dir {
            let seed_dir = dir.join(format!("seed_{seed}"));
            write_index_list(
                &seed_dir.join(format!("labeled_cycle_{cycle:03}.txt")),
                pool.labeled(),
            )?;
        }

        cycles.push(CycleRecord {
            cycle,
            labeled_count: pool.labeled().len(),
            accuracy_original,
            accuracy_fr,
            init_hash,
            trained_hash,
        });

        if cycle + 1 < al.num_cycles {
            let picks = match al.strategy {
                Strategy::Random => {
                    schedule.cycles[cycle + 1][schedule.cycles[cycle].len()..].to_vec()
                }
                _ => {
                    let acq_seed = substream(substream(seed, CYCLE_ACQ_TAG), cycle as u64);
                    acquire(
                        &net,
                        &pool,
                        train_ds,
                        eval_spec.as_ref(),
                        al.strategy,
                        al.budget_per_cycle,
                        acq_seed,
                        al.score_head,
                    )?
                }
            };
            pool.acquire_indices(&picks)?;
        }
    }
    Ok(SeedRecords { seed, cycles })
}

/// All seeds, optionally fanned out over `threads` OS threads. Each seed is
/// fully independent; results always come back in seed order.
#[allow(clippy::too_many_arguments)]
pub fn run_al_experiment<S: Scalar>(
    model: &ModelConfig,
    optim: &OptimizerConfig,
    al: &ALConfig,
    train_ds: &Dataset,
    test_ds: &Dataset,
    augment: Option<&AugmentSpec>,
    artifact_dir: Option<&Path>,
    threads: usize,
) -> Result<Vec<SeedRecords>> {
    al.validate(train_ds.len())?;
    if threads <= 1 || al.seeds.len() <= 1 {
        return al
            .seeds
            .iter()
            .map(|&seed| {
                run_al_seed::<S>(model, optim, al, train_ds, test_ds, augment, seed, artifact_dir)
            })
            .collect();
    }
    let mut results: Vec<Option<Result<SeedRecords>>> = Vec::new();
    results.resize_with(al.seeds.len(), || None);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for &seed in &al.seeds {
            handles.push(scope.spawn(move || {
                run_al_seed::<S>(model, optim, al, train_ds, test_ds, augment, seed, artifact_dir)
            }));
        }
        for (slot, handle) in results.iter_mut().zip(handles) {
            *slot = Some(handle.join().expect("seed worker panicked"));
        }
    });
    results.into_iter().map(|r| r.expect("all slots filled")).collect()
}
