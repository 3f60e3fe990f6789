use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, Label, LabelSpace, UnlabeledPool};
use crate::{seed, Error, Result};

/// A target task: a training partition (the source of labeled, dev and
/// unlabeled examples) plus a held-out test partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub name: String,
    pub train: Dataset,
    pub test: Dataset,
    /// Fixed development set, used only by the full regime.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev: Option<Dataset>,
}

impl Task {
    pub fn new(name: impl Into<String>, train: Dataset, test: Dataset) -> Result<Task> {
        if train.label_space != test.label_space {
            return Err(Error::Validation(
                "train and test partitions use different label spaces".into(),
            ));
        }
        let train_ids: HashSet<&str> = train.ids().collect();
        if let Some(id) = test.ids().find(|id| train_ids.contains(id)) {
            return Err(Error::Validation(format!(
                "id `{id}` appears in both train and test partitions"
            )));
        }
        Ok(Task {
            name: name.into(),
            train,
            test,
            dev: None,
        })
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.train.label_space
    }
}

/// How much labeled data is available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    /// All labeled training data.
    Full,
    /// A fixed number of random labeled examples.
    Limited { size: usize },
    /// `per_class` examples per class (per bin for continuous labels).
    FewShot { per_class: usize },
}

impl Regime {
    pub const LIMITED_DEFAULT: usize = 1024;
    pub const FEW_SHOT_DEFAULT: usize = 8;

    pub fn limited() -> Regime {
        Regime::Limited {
            size: Self::LIMITED_DEFAULT,
        }
    }

    pub fn few_shot(per_class: usize) -> Regime {
        Regime::FewShot { per_class }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Regime::Full => "full",
            Regime::Limited { .. } => "limited",
            Regime::FewShot { .. } => "few_shot",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeOptions {
    pub dev_size: usize,
    /// Bins used for few-shot sampling of continuous labels.
    pub num_bins: usize,
    /// When set, the dev set is drawn with this seed instead of the split
    /// seed, so it stays fixed across restarts.
    pub dev_seed: Option<u64>,
}

impl Default for RegimeOptions {
    fn default() -> Self {
        RegimeOptions {
            dev_size: 256,
            num_bins: 5,
            dev_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSplit {
    pub regime: Regime,
    pub seed: u64,
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
    pub pool: UnlabeledPool,
}

impl RegimeSplit {
    /// Gold labels of the pool, recovered from the training partition.
    pub fn pool_gold(&self, task: &Task) -> Result<Dataset> {
        self.pool.attach_labels(
            format!("{}-pool-gold", task.name),
            task.label_space().clone(),
            &task.train.gold_labels(),
        )
    }
}

/// Strip every label, preserving ids, segments and order.
pub fn strip_labels(dataset: &Dataset) -> UnlabeledPool {
    UnlabeledPool {
        source_name: dataset.name.clone(),
        examples: dataset.examples.iter().map(|e| e.unlabeled()).collect(),
    }
}

/// Bin index of `value` in `[lo, hi]` split into `num_bins` equal-width bins.
/// `hi` belongs to the last bin.
pub fn bin_of(value: f64, lo: f64, hi: f64, num_bins: usize) -> usize {
    let width = (hi - lo) / num_bins as f64;
    let raw = ((value - lo) / width).floor();
    if raw <= 0.0 {
        0
    } else {
        (raw as usize).min(num_bins - 1)
    }
}

/// Map each labeled example id to its bin over the continuous label interval.
pub fn bin_continuous_labels(dataset: &Dataset, num_bins: usize) -> Result<BTreeMap<String, usize>> {
    let LabelSpace::Continuous { lo, hi } = dataset.label_space else {
        return Err(Error::Type(format!(
            "`{}` has a categorical label space; binning needs continuous labels",
            dataset.name
        )));
    };
    if num_bins == 0 {
        return Err(Error::Config("num_bins must be at least 1".into()));
    }
    Ok(dataset
        .examples
        .iter()
        .filter_map(|e| match e.label {
            Some(Label::Value(v)) => Some((e.id.clone(), bin_of(v, lo, hi, num_bins))),
            _ => None,
        })
        .collect())
}

/// Stratum of each example: class index, or bin index for continuous labels.
fn strata(dataset: &Dataset, num_bins: usize) -> Result<(Vec<usize>, Vec<String>)> {
    match &dataset.label_space {
        LabelSpace::Categorical { classes } => {
            let s = dataset
                .examples
                .iter()
                .map(|e| e.label.and_then(|l| l.class()).expect("fully labeled"))
                .collect();
            Ok((s, classes.clone()))
        }
        LabelSpace::Continuous { lo, hi } => {
            if num_bins == 0 {
                return Err(Error::Config("num_bins must be at least 1".into()));
            }
            let s = dataset
                .examples
                .iter()
                .map(|e| {
                    let v = e.label.and_then(|l| l.value()).expect("fully labeled");
                    bin_of(v, *lo, *hi, num_bins)
                })
                .collect();
            let names = (0..num_bins).map(|b| format!("bin {b}")).collect();
            Ok((s, names))
        }
    }
}

fn shuffled(indices: &[usize], seed: u64) -> Vec<usize> {
    let mut out = indices.to_vec();
    out.shuffle(&mut seed::rng(seed));
    out
}

/// Draw a data-regime split from a task.
///
/// The dev set is drawn first from the training partition, then the labeled
/// training subset from what remains; the pool is everything left over, with
/// labels stripped. In the full regime every training example is labeled and
/// the pool is the whole labeled set without labels. Deterministic in
/// `(task, regime, seed, options)`.
pub fn sample_regime(
    task: &Task,
    regime: Regime,
    seed: u64,
    options: &RegimeOptions,
) -> Result<RegimeSplit> {
    let source = &task.train;
    if !source.is_fully_labeled() {
        return Err(Error::Validation(format!(
            "`{}` must be fully labeled to sample a regime",
            source.name
        )));
    }
    let n = source.len();
    let all: Vec<usize> = (0..n).collect();

    let dev_seed = options
        .dev_seed
        .unwrap_or_else(|| seed::derive(seed, "dev", 0));
    let train_seed = seed::derive(seed, "train", 0);

    let name = |part: &str| format!("{}-{part}", task.name);

    // full regime with a fixed dev set uses everything for training
    if let (Regime::Full, Some(dev)) = (regime, &task.dev) {
        return Ok(RegimeSplit {
            regime,
            seed,
            train: source.select(name("train"), &all),
            dev: dev.clone(),
            test: task.test.clone(),
            pool: strip_labels(&source.select(name("pool"), &all)),
        });
    }

    let order = shuffled(&all, dev_seed);
    let dev_count = options.dev_size.min(n);
    let mut dev_idx: Vec<usize> = order[..dev_count].to_vec();
    dev_idx.sort_unstable();
    let dev_set: HashSet<usize> = dev_idx.iter().copied().collect();
    let remaining: Vec<usize> = all.iter().copied().filter(|i| !dev_set.contains(i)).collect();

    let mut train_idx: Vec<usize> = match regime {
        Regime::Full => remaining.clone(),
        Regime::Limited { size } => {
            let order = shuffled(&remaining, train_seed);
            order[..size.min(order.len())].to_vec()
        }
        Regime::FewShot { per_class } => {
            let (stratum, names) = strata(source, options.num_bins)?;
            let mut available = vec![0usize; names.len()];
            for &i in &remaining {
                available[stratum[i]] += 1;
            }
            if let Some((s, &have)) = available
                .iter()
                .enumerate()
                .find(|(_, &have)| have < per_class)
            {
                return Err(Error::InsufficientData {
                    class: names[s].clone(),
                    available: have,
                    required: per_class,
                });
            }
            let mut taken = vec![0usize; names.len()];
            let mut picked = Vec::with_capacity(per_class * names.len());
            for i in shuffled(&remaining, train_seed) {
                let s = stratum[i];
                if taken[s] < per_class {
                    taken[s] += 1;
                    picked.push(i);
                }
            }
            picked
        }
    };
    train_idx.sort_unstable();

    let pool_idx: Vec<usize> = if regime == Regime::Full {
        train_idx.clone()
    } else {
        let chosen: HashSet<usize> = train_idx.iter().copied().collect();
        remaining.into_iter().filter(|i| !chosen.contains(i)).collect()
    };

    Ok(RegimeSplit {
        regime,
        seed,
        train: source.select(name("train"), &train_idx),
        dev: source.select(name("dev"), &dev_idx),
        test: task.test.clone(),
        pool: strip_labels(&source.select(name("pool"), &pool_idx)),
    })
}
