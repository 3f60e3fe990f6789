//! Self-training: the broad-distribution loop that re-annotates the whole
//! pool every iteration and retrains from f0, the confidence-filtering
//! baseline, and unlabeled-pool mixing.

mod algorithm;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Example, GoldLabels, Label, LabelSpace, UnlabeledPool};
use crate::textmodel::{score_labels, Metric, Predictor};
use crate::{Error, Result};

pub use algorithm::{confidence_filter_selftrain, self_train, SelfTrainData, SelfTrainOutput};

pub const RESULT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabel {
    pub id: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

/// Ũ: teacher labels for pool examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabeledSet {
    pub entries: Vec<PseudoLabel>,
    pub produced_by_iteration: usize,
}

impl PseudoLabeledSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Share of entries whose label matches `other` at the same position.
    /// Continuous labels match when within `tolerance`.
    pub fn agreement(&self, other: &PseudoLabeledSet, tolerance: f64) -> f64 {
        if self.entries.is_empty() {
            return 1.0;
        }
        let same = self
            .entries
            .iter()
            .zip(&other.entries)
            .filter(|(a, b)| match (a.label, b.label) {
                (Label::Class(x), Label::Class(y)) => x == y,
                (Label::Value(x), Label::Value(y)) => (x - y).abs() <= tolerance,
                _ => false,
            })
            .count();
        same as f64 / self.entries.len() as f64
    }

    /// Labeling quality against gold: accuracy for classes, Spearman for
    /// continuous labels.
    pub fn labeling_score(&self, space: &LabelSpace, gold: &GoldLabels) -> Result<f64> {
        let (pred, truth) = align(self.entries.iter().map(|e| (e.id.as_str(), e.label)), gold)?;
        score_labels(&pred, &truth, &Metric::default_for(space), space)
    }
}

/// Pair predicted labels with gold ones by id.
pub fn align<'a>(
    predicted: impl IntoIterator<Item = (&'a str, Label)>,
    gold: &GoldLabels,
) -> Result<(Vec<Label>, Vec<Label>)> {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for (id, label) in predicted {
        let g = gold
            .get(id)
            .ok_or_else(|| Error::Coverage(format!("no gold label for `{id}`")))?;
        pred.push(label);
        truth.push(*g);
    }
    Ok((pred, truth))
}

/// Label every pool example with the teacher, in pool order.
pub fn annotate_pool<P: Predictor + ?Sized>(
    teacher: &P,
    pool: &UnlabeledPool,
    iteration: usize,
) -> PseudoLabeledSet {
    annotate_examples(teacher, &pool.examples, iteration)
}

pub(crate) fn annotate_examples<P: Predictor + ?Sized>(
    teacher: &P,
    examples: &[Example],
    iteration: usize,
) -> PseudoLabeledSet {
    let entries = examples
        .par_iter()
        .map(|ex| {
            let p = teacher.predict(ex);
            PseudoLabel {
                id: ex.id.clone(),
                label: p.label(),
                confidence: p.confidence(),
            }
        })
        .collect();
    PseudoLabeledSet {
        entries,
        produced_by_iteration: iteration,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalFinetune {
    On,
    Off,
    /// Decided once, at the first iteration, by dev score.
    AutoByDev,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelfTrainMode {
    Broad,
    ConfidenceFiltering { batch: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfTrainConfig {
    pub max_iterations: usize,
    /// Stop once successive pseudo-label sets agree on at least this share
    /// of the pool for `agreement_patience` consecutive iterations.
    pub agreement_threshold: f64,
    pub agreement_patience: usize,
    /// Tolerance under which two continuous pseudo-labels count as equal.
    pub agreement_tolerance: f64,
    /// Also stop after this many iterations without a dev improvement.
    pub dev_patience: Option<usize>,
    pub final_finetune: FinalFinetune,
    pub drop_lowest_confidence_fraction: f64,
    pub mode: SelfTrainMode,
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        SelfTrainConfig {
            max_iterations: 30,
            agreement_threshold: 0.999,
            agreement_patience: 2,
            agreement_tolerance: 1e-3,
            dev_patience: None,
            final_finetune: FinalFinetune::AutoByDev,
            drop_lowest_confidence_fraction: 0.0,
            mode: SelfTrainMode::Broad,
        }
    }
}

impl SelfTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.agreement_threshold) {
            return Err(Error::Config("agreement_threshold must lie in [0, 1]".into()));
        }
        if self.agreement_patience == 0 || self.dev_patience == Some(0) {
            return Err(Error::Config("patience values must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.drop_lowest_confidence_fraction) {
            return Err(Error::Config(
                "drop_lowest_confidence_fraction must lie in [0, 1)".into(),
            ));
        }
        if let SelfTrainMode::ConfidenceFiltering { batch: 0 } = self.mode {
            return Err(Error::Config("confidence-filtering batch must be at least 1".into()));
        }
        Ok(())
    }

    /// Whether this configuration consults a dev set.
    pub fn needs_dev(&self) -> bool {
        self.dev_patience.is_some() || self.final_finetune == FinalFinetune::AutoByDev
    }
}

/// One self-training iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Size of the student's training set.
    pub train_size: usize,
    /// Pseudo-labels produced this iteration (after any drop).
    pub pseudo_labeled: usize,
    /// Labeling score of this iteration's pseudo-labels over the full pool.
    pub pool_score: Option<f64>,
    pub dev_metric: Option<f64>,
    pub test_metric: Option<f64>,
    /// Agreement with the previous iteration's pseudo-labels.
    pub agreement: Option<f64>,
    /// Confidence filtering: pool examples added this iteration with the
    /// labels they were frozen with, and the accuracy of that batch.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub added: Vec<PseudoLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub added_accuracy: Option<f64>,
    /// Content hash of the parameters the student started from.
    pub student_init_hash: String,
}

/// Scores of the teacher trained on the labeled set alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherRecord {
    pub pool_score: Option<f64>,
    pub dev_metric: Option<f64>,
    pub test_metric: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTrainResult {
    pub schema_version: u32,
    pub config: SelfTrainConfig,
    pub seed: u64,
    pub labeled_size: usize,
    pub pool_size: usize,
    pub f0_hash: String,
    pub final_model_hash: String,
    /// Resolved final fine-tune decision.
    pub finetune_on_labeled: bool,
    pub converged_at: Option<usize>,
    pub teacher: TeacherRecord,
    pub per_iteration: Vec<IterationRecord>,
    /// The pseudo-label set of every iteration.
    pub pseudo_labels: Vec<PseudoLabeledSet>,
    pub final_pool_score: Option<f64>,
    pub final_dev: Option<f64>,
    pub final_test: Option<f64>,
}

impl SelfTrainResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMix {
    InOnly,
    OutOnly,
    InPlusOut,
}

pub const IN_PREFIX: &str = "in:";
pub const OUT_PREFIX: &str = "out:";

fn prefixed(examples: &[Example], prefix: &str) -> Vec<Example> {
    examples
        .iter()
        .map(|e| Example {
            id: format!("{prefix}{}", e.id),
            ..e.clone()
        })
        .collect()
}

/// Combine in-domain and out-of-domain pools. `InPlusOut` puts in-domain
/// examples first and prefixes ids with their source.
pub fn mix_pools(in_domain: &UnlabeledPool, out_of_domain: &UnlabeledPool, mode: PoolMix) -> Result<UnlabeledPool> {
    match mode {
        PoolMix::InOnly => Ok(in_domain.clone()),
        PoolMix::OutOnly => Ok(out_of_domain.clone()),
        PoolMix::InPlusOut => {
            let mut examples = prefixed(&in_domain.examples, IN_PREFIX);
            examples.extend(prefixed(&out_of_domain.examples, OUT_PREFIX));
            UnlabeledPool::new(
                format!("{}+{}", in_domain.source_name, out_of_domain.source_name),
                examples,
            )
        }
    }
}

/// Gold labels matching the ids of [`mix_pools`]'s output.
pub fn mix_gold(in_gold: &GoldLabels, out_gold: &GoldLabels, mode: PoolMix) -> GoldLabels {
    match mode {
        PoolMix::InOnly => in_gold.clone(),
        PoolMix::OutOnly => out_gold.clone(),
        PoolMix::InPlusOut => in_gold
            .iter()
            .map(|(k, v)| (format!("{IN_PREFIX}{k}"), *v))
            .chain(out_gold.iter().map(|(k, v)| (format!("{OUT_PREFIX}{k}"), *v)))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabelSpace;
    use crate::textmodel::{init_params, FeatureConfig, InitScheme};

    fn pool(n: usize, tag: &str) -> UnlabeledPool {
        let ex = (0..n).map(|i| Example::single(i.to_string(), format!("{tag} {i}"), None)).collect();
        UnlabeledPool::new(tag, ex).unwrap()
    }

    #[test]
    fn zero_teacher_labels_everything_class_zero() {
        let space = LabelSpace::categorical(["a", "b"]).unwrap();
        let t = init_params(&space, &FeatureConfig { hash_dim: 16, ..Default::default() }, 0, InitScheme::Zeros).unwrap();
        let u = annotate_pool(&t, &pool(5, "x"), 1);
        assert_eq!(u.len(), 5);
        assert!(u.entries.iter().all(|e| e.label == Label::Class(0) && e.confidence == Some(0.5)));
        assert!(annotate_pool(&t, &UnlabeledPool::empty("e"), 1).is_empty());
    }

    #[test]
    fn mixing() {
        let a = pool(100, "in");
        let b = pool(200, "out");
        assert_eq!(mix_pools(&a, &b, PoolMix::InOnly).unwrap(), a);
        let both = mix_pools(&a, &b, PoolMix::InPlusOut).unwrap();
        assert_eq!(both.len(), 300);
        assert!(both.examples[0].id.starts_with(IN_PREFIX));
        assert!(mix_pools(&a, &UnlabeledPool::empty("o"), PoolMix::OutOnly).unwrap().is_empty());
    }

    #[test]
    fn config_checks() {
        let mut c = SelfTrainConfig::default();
        assert!(c.validate().is_ok());
        c.drop_lowest_confidence_fraction = 1.0;
        assert!(c.validate().is_err());
        c.drop_lowest_confidence_fraction = 0.0;
        c.max_iterations = 0;
        assert!(c.validate().is_err());
    }
}
