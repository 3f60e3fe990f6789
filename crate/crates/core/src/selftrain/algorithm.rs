use std::cmp::Ordering;

use super::{
    align, annotate_examples, annotate_pool, FinalFinetune, IterationRecord, PseudoLabel,
    PseudoLabeledSet,
    SelfTrainConfig, SelfTrainMode, SelfTrainResult, TeacherRecord, RESULT_SCHEMA_VERSION,
};
use crate::corpus::{Dataset, Example, GoldLabels, UnlabeledPool};
use crate::textmodel::{accuracy, evaluate, train, Metric, ModelParams, TrainConfig};
use crate::{seed, Error, Result};

/// Result summary plus the final student.
#[derive(Debug, Clone)]
pub struct SelfTrainOutput {
    pub result: SelfTrainResult,
    pub final_model: ModelParams,
}

/// Everything a self-training run reads besides f0 and its configs.
#[derive(Debug, Clone, Copy)]
pub struct SelfTrainData<'a> {
    pub labeled: &'a Dataset,
    pub pool: &'a UnlabeledPool,
    pub dev: Option<&'a Dataset>,
    pub test: Option<&'a Dataset>,
    /// Held-back pool labels, for labeling-accuracy tracking.
    pub pool_gold: Option<&'a GoldLabels>,
}

struct Scorer<'a> {
    data: SelfTrainData<'a>,
    metric: Metric,
}

impl Scorer<'_> {
    fn score(model: &ModelParams, set: Option<&Dataset>, metric: &Metric) -> Result<Option<f64>> {
        match set.filter(|d| !d.is_empty()) {
            None => Ok(None),
            Some(d) => match evaluate(model, d, metric) {
                Ok(s) => Ok(Some(s)),
                Err(Error::UndefinedMetric(_)) => Ok(Some(f64::NEG_INFINITY)),
                Err(e) => Err(e),
            },
        }
    }

    fn dev(&self, model: &ModelParams) -> Result<Option<f64>> {
        Self::score(model, self.data.dev, &self.metric)
    }

    fn test(&self, model: &ModelParams) -> Result<Option<f64>> {
        Self::score(model, self.data.test, &self.metric)
    }

    fn pool(&self, labels: &PseudoLabeledSet, model: &ModelParams) -> Result<Option<f64>> {
        match self.data.pool_gold {
            None => Ok(None),
            Some(_) if labels.is_empty() => Ok(None),
            Some(gold) => match labels.labeling_score(&model.label_space, gold) {
                Ok(s) => Ok(Some(s)),
                Err(Error::UndefinedMetric(_)) => Ok(Some(f64::NEG_INFINITY)),
                Err(e) => Err(e),
            },
        }
    }
}

fn check_inputs(f0: &ModelParams, data: &SelfTrainData, st: &SelfTrainConfig) -> Result<()> {
    st.validate()?;
    f0.validate()?;
    if data.labeled.is_empty() {
        return Err(Error::Config("self-training needs a nonempty labeled set".into()));
    }
    if data.pool.is_empty() {
        return Err(Error::Config("self-training needs a nonempty pool".into()));
    }
    if data.labeled.label_space != f0.label_space {
        return Err(Error::Type("f0's head does not match the labeled set's label space".into()));
    }
    if st.needs_dev() && data.dev.is_none_or(Dataset::is_empty) {
        return Err(Error::Config(
            "auto final fine-tuning and dev patience need a dev set".into(),
        ));
    }
    Ok(())
}

/// Pseudo-labeled copies are renamed so they can sit next to a labeled
/// example with the same id (in the full regime the pool is the labeled set).
const PSEUDO_PREFIX: &str = "u:";

fn pseudo_dataset(
    labeled: &Dataset,
    examples: &[Example],
    labels: &PseudoLabeledSet,
    keep: &[usize],
) -> Result<Dataset> {
    let pseudo: Vec<Example> = keep
        .iter()
        .map(|&i| Example {
            id: format!("{PSEUDO_PREFIX}{}", examples[i].id),
            ..examples[i].with_label(labels.entries[i].label)
        })
        .collect();
    let pseudo = Dataset::new("pseudo", labeled.label_space.clone(), pseudo)?;
    labeled.concat(&pseudo, "labeled+pseudo")
}

/// Indices kept after dropping the lowest-confidence `fraction`; among
/// equal confidences the later pool index is dropped first.
fn keep_after_drop(labels: &PseudoLabeledSet, fraction: f64) -> Result<Vec<usize>> {
    let n = labels.len();
    let drop = (fraction * n as f64).floor() as usize;
    if drop == 0 {
        return Ok((0..n).collect());
    }
    let conf = labels
        .entries
        .iter()
        .map(|e| {
            e.confidence.ok_or_else(|| {
                Error::UnsupportedMode("confidence-based dropping needs a classification head".into())
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| conf[a].total_cmp(&conf[b]).then(b.cmp(&a)));
    let mut dropped = vec![false; n];
    for &i in &order[..drop] {
        dropped[i] = true;
    }
    Ok((0..n).filter(|&i| !dropped[i]).collect())
}

fn student_config(train_config: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed: seed::derive(seed, "selftrain-train", 0),
        ..train_config.clone()
    }
}

fn metric_for(f0: &ModelParams, train_config: &TrainConfig) -> Metric {
    train_config
        .metric
        .clone()
        .unwrap_or_else(|| Metric::default_for(&f0.label_space))
}

fn finish(
    st: &SelfTrainConfig,
    seed: u64,
    f0: &ModelParams,
    data: &SelfTrainData,
    scorer: &Scorer,
    parts: (bool, Option<usize>, TeacherRecord, Vec<IterationRecord>, Vec<PseudoLabeledSet>),
    final_model: ModelParams,
) -> Result<SelfTrainOutput> {
    let (finetune_on_labeled, converged_at, teacher, per_iteration, pseudo_labels) = parts;
    let final_labels = annotate_pool(&final_model, data.pool, per_iteration.len() + 1);
    let result = SelfTrainResult {
        schema_version: RESULT_SCHEMA_VERSION,
        config: st.clone(),
        seed,
        labeled_size: data.labeled.len(),
        pool_size: data.pool.len(),
        f0_hash: f0.content_hash(),
        final_model_hash: final_model.content_hash(),
        finetune_on_labeled,
        converged_at,
        teacher,
        per_iteration,
        pseudo_labels,
        final_pool_score: scorer.pool(&final_labels, &final_model)?,
        final_dev: scorer.dev(&final_model)?,
        final_test: scorer.test(&final_model)?,
    };
    Ok(SelfTrainOutput { result, final_model })
}

/// Broad-distribution self-training.
///
/// The teacher f1 is f0 trained on the labeled set. Every iteration the
/// current teacher labels the whole pool, and a student is trained from a
/// copy of f0 on the labeled set plus every pseudo-labeled example (minus
/// the configured lowest-confidence share), then becomes the next teacher.
pub fn self_train(
    f0: &ModelParams,
    data: SelfTrainData,
    st: &SelfTrainConfig,
    train_config: &TrainConfig,
    seed: u64,
) -> Result<SelfTrainOutput> {
    if let SelfTrainMode::ConfidenceFiltering { batch } = st.mode {
        return confidence_filter_selftrain(f0, data, batch, st, train_config, seed);
    }
    check_inputs(f0, &data, st)?;
    let cfg = student_config(train_config, seed);
    let scorer = Scorer {
        data,
        metric: metric_for(f0, train_config),
    };

    let mut teacher = train(f0, data.labeled, &cfg, data.dev)?.params;
    let first = annotate_pool(&teacher, data.pool, 0);
    let teacher_record = TeacherRecord {
        pool_score: scorer.pool(&first, &teacher)?,
        dev_metric: scorer.dev(&teacher)?,
        test_metric: scorer.test(&teacher)?,
    };

    let mut finetune = match st.final_finetune {
        FinalFinetune::On => Some(true),
        FinalFinetune::Off => Some(false),
        FinalFinetune::AutoByDev => None,
    };
    let mut records = Vec::new();
    let mut sets: Vec<PseudoLabeledSet> = Vec::new();
    let mut streak = 0usize;
    let mut converged_at = None;
    let mut best_dev = f64::NEG_INFINITY;
    let mut stale_dev = 0usize;

    for t in 1..=st.max_iterations {
        let labels = if t == 1 {
            PseudoLabeledSet { produced_by_iteration: 1, ..first.clone() }
        } else {
            annotate_pool(&teacher, data.pool, t)
        };
        let agreement = sets.last().map(|prev| labels.agreement(prev, st.agreement_tolerance));
        let keep = keep_after_drop(&labels, st.drop_lowest_confidence_fraction)?;
        let train_set = pseudo_dataset(data.labeled, &data.pool.examples, &labels, &keep)?;

        let init = f0.clone();
        let student_init_hash = init.content_hash();
        let mut student = train(&init, &train_set, &cfg, data.dev)?.params;
        let tuned = |s: &ModelParams| -> Result<ModelParams> { Ok(train(s, data.labeled, &cfg, data.dev)?.params) };
        match finetune {
            Some(true) => student = tuned(&student)?,
            Some(false) => {}
            None => {
                let candidate = tuned(&student)?;
                let with = scorer.dev(&candidate)?.unwrap_or(f64::NEG_INFINITY);
                let without = scorer.dev(&student)?.unwrap_or(f64::NEG_INFINITY);
                let on = with > without;
                finetune = Some(on);
                if on {
                    student = candidate;
                }
            }
        }

        let dev_metric = scorer.dev(&student)?;
        records.push(IterationRecord {
            iteration: t,
            train_size: train_set.len(),
            pseudo_labeled: keep.len(),
            pool_score: scorer.pool(&labels, &student)?,
            dev_metric,
            test_metric: scorer.test(&student)?,
            agreement,
            added: Vec::new(),
            added_accuracy: None,
            student_init_hash,
        });
        sets.push(labels);
        teacher = student;

        if agreement.is_some_and(|a| a >= st.agreement_threshold) {
            streak += 1;
        } else {
            streak = 0;
        }
        if streak >= st.agreement_patience {
            converged_at = Some(t);
            break;
        }
        if let (Some(patience), Some(d)) = (st.dev_patience, dev_metric) {
            if d > best_dev {
                best_dev = d;
                stale_dev = 0;
            } else {
                stale_dev += 1;
                if stale_dev >= patience {
                    break;
                }
            }
        }
    }

    finish(
        st,
        seed,
        f0,
        &data,
        &scorer,
        (finetune.unwrap_or(false), converged_at, teacher_record, records, sets),
        teacher,
    )
}

/// The traditional baseline: each iteration the teacher labels what is left
/// of the pool and the `batch` most confident examples (ties to the lower
/// pool index) join the labeled set for good. Students retrain from f0 on
/// the accumulated set until the pool is exhausted.
pub fn confidence_filter_selftrain(
    f0: &ModelParams,
    data: SelfTrainData,
    batch: usize,
    st: &SelfTrainConfig,
    train_config: &TrainConfig,
    seed: u64,
) -> Result<SelfTrainOutput> {
    let st = SelfTrainConfig {
        mode: SelfTrainMode::ConfidenceFiltering { batch },
        final_finetune: FinalFinetune::Off,
        dev_patience: None,
        ..st.clone()
    };
    if !f0.label_space.is_categorical() {
        return Err(Error::UnsupportedMode(
            "confidence filtering needs a classification head".into(),
        ));
    }
    check_inputs(f0, &data, &st)?;
    let cfg = student_config(train_config, seed);
    let scorer = Scorer {
        data,
        metric: metric_for(f0, train_config),
    };

    let mut teacher = train(f0, data.labeled, &cfg, data.dev)?.params;
    let first = annotate_pool(&teacher, data.pool, 0);
    let teacher_record = TeacherRecord {
        pool_score: scorer.pool(&first, &teacher)?,
        dev_metric: scorer.dev(&teacher)?,
        test_metric: scorer.test(&teacher)?,
    };

    let mut remaining: Vec<usize> = (0..data.pool.len()).collect();
    let mut accumulated = data.labeled.clone();
    let mut records = Vec::new();
    let mut sets = Vec::new();
    let mut t = 0;
    while !remaining.is_empty() {
        t += 1;
        let full = if t == 1 {
            PseudoLabeledSet { produced_by_iteration: 1, ..first.clone() }
        } else {
            annotate_pool(&teacher, data.pool, t)
        };
        let subset: Vec<Example> = remaining.iter().map(|&i| data.pool.examples[i].clone()).collect();
        let labels = annotate_examples(&teacher, &subset, t);

        let mut order: Vec<usize> = (0..subset.len()).collect();
        order.sort_by(|&a, &b| {
            let ca = labels.entries[a].confidence.expect("classification");
            let cb = labels.entries[b].confidence.expect("classification");
            cb.partial_cmp(&ca).unwrap_or(Ordering::Equal).then(a.cmp(&b))
        });
        let mut chosen: Vec<usize> = order.into_iter().take(batch).collect();
        chosen.sort_unstable();

        let added: Vec<Example> = chosen
            .iter()
            .map(|&j| Example {
                id: format!("{PSEUDO_PREFIX}{}", subset[j].id),
                ..subset[j].with_label(labels.entries[j].label)
            })
            .collect();
        let added_labels: Vec<PseudoLabel> = chosen.iter().map(|&j| labels.entries[j].clone()).collect();
        let added_accuracy = match data.pool_gold {
            Some(gold) => {
                let (p, g) = align(chosen.iter().map(|&j| (subset[j].id.as_str(), labels.entries[j].label)), gold)?;
                let p: Vec<usize> = p.iter().filter_map(|l| l.class()).collect();
                let g: Vec<usize> = g.iter().filter_map(|l| l.class()).collect();
                Some(accuracy(&p, &g)?)
            }
            None => None,
        };
        let batch_set = Dataset::new("added", accumulated.label_space.clone(), added)?;
        accumulated = accumulated.concat(&batch_set, "labeled+added")?;
        let chosen_pool: Vec<usize> = chosen.iter().map(|&j| remaining[j]).collect();
        remaining.retain(|i| !chosen_pool.contains(i));

        let init = f0.clone();
        let student_init_hash = init.content_hash();
        let student = train(&init, &accumulated, &cfg, data.dev)?.params;
        records.push(IterationRecord {
            iteration: t,
            train_size: accumulated.len(),
            pseudo_labeled: accumulated.len() - data.labeled.len(),
            pool_score: scorer.pool(&full, &teacher)?,
            dev_metric: scorer.dev(&student)?,
            test_metric: scorer.test(&student)?,
            agreement: None,
            added: added_labels,
            added_accuracy,
            student_init_hash,
        });
        sets.push(full);
        teacher = student;
    }

    finish(
        &st,
        seed,
        f0,
        &data,
        &scorer,
        (false, None, teacher_record, records, sets),
        teacher,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    fn set(conf: &[f64]) -> PseudoLabeledSet {
        PseudoLabeledSet {
            entries: conf
                .iter()
                .enumerate()
                .map(|(i, c)| PseudoLabel { id: i.to_string(), label: Label::Class(0), confidence: Some(*c) })
                .collect(),
            produced_by_iteration: 1,
        }
    }

    #[test]
    fn drop_prefers_later_index_on_ties() {
        let keep = keep_after_drop(&set(&[0.6, 0.6, 0.9, 0.6]), 0.5).unwrap();
        assert_eq!(keep, vec![0, 2]);
        assert_eq!(keep_after_drop(&set(&[0.6, 0.7]), 0.0).unwrap(), vec![0, 1]);
    }
}
