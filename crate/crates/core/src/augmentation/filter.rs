use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generator::{generate_candidates, Generator};
use crate::corpus::{Dataset, Example, Label, LabelSpace, UnlabeledPool};
use crate::textmodel::{evaluate, train, Metric, ModelParams, Prediction, Predictor, TrainConfig};
use crate::{seed, Error, Result};

/// One synthetic auxiliary-task example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedExample {
    pub premise: String,
    pub hypothesis: String,
    pub label: String,
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_confidence: Option<f64>,
}

/// A candidate together with the auxiliary classifier's verdict on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub source_id: String,
    pub premise: String,
    pub hypothesis: String,
    /// Requested label (index into the auxiliary label space).
    pub label: usize,
    pub predicted: usize,
    /// Probability the classifier assigns to `label`.
    pub probability: f64,
}

impl ScoredCandidate {
    /// Argmax agrees with the requested label and its probability exceeds `tau`.
    pub fn kept(&self, tau: f64) -> bool {
        self.predicted == self.label && self.probability > tau
    }
}

fn score_one<P: Predictor + ?Sized>(
    classifier: &P,
    source_id: &str,
    premise: &str,
    hypothesis: &str,
    label: usize,
) -> ScoredCandidate {
    let ex = Example::pair("", premise, hypothesis, None);
    let (predicted, probability) = match classifier.predict(&ex) {
        Prediction::Class { probabilities, label: p, .. } => (p, probabilities[label]),
        Prediction::Value(_) => unreachable!("checked categorical"),
    };
    ScoredCandidate {
        source_id: source_id.to_owned(),
        premise: premise.to_owned(),
        hypothesis: hypothesis.to_owned(),
        label,
        predicted,
        probability,
    }
}

fn label_index(space: &LabelSpace, label: &str) -> Result<usize> {
    if !space.is_categorical() {
        return Err(Error::Type("filtering needs a categorical auxiliary classifier".into()));
    }
    space
        .class_index(label)
        .ok_or_else(|| Error::Config(format!("label `{label}` is not an auxiliary class")))
}

/// Keep candidate `c` iff the classifier's argmax on `(source, c)` is
/// `label` and its probability is strictly above `tau`.
pub fn filter_candidates<P: Predictor + ?Sized>(
    classifier: &P,
    source: &str,
    source_id: &str,
    candidates: &[String],
    label: &str,
    tau: f64,
) -> Result<Vec<AugmentedExample>> {
    let k = label_index(classifier.label_space(), label)?;
    Ok(candidates
        .iter()
        .map(|c| score_one(classifier, source_id, source, c, k))
        .filter(|s| s.kept(tau))
        .map(|s| AugmentedExample {
            premise: s.premise,
            hypothesis: s.hypothesis,
            label: label.to_owned(),
            source_id: s.source_id,
            filter_confidence: Some(s.probability),
        })
        .collect())
}

/// Every generated candidate for a pool, scored once so that any number of
/// thresholds can be applied afterwards.
#[derive(Debug, Clone)]
pub struct ScoredPool {
    pub label_space: LabelSpace,
    pub candidates: Vec<ScoredCandidate>,
}

impl ScoredPool {
    pub fn filter(&self, tau: f64) -> SyntheticSet {
        let examples = self
            .candidates
            .iter()
            .filter(|c| c.kept(tau))
            .map(|c| AugmentedExample {
                premise: c.premise.clone(),
                hypothesis: c.hypothesis.clone(),
                label: self.label_space.class_name(c.label).expect("valid index").to_owned(),
                source_id: c.source_id.clone(),
                filter_confidence: Some(c.probability),
            })
            .collect();
        SyntheticSet {
            label_space: self.label_space.clone(),
            examples,
        }
    }

    pub fn kept_count(&self, tau: f64) -> usize {
        self.candidates.iter().filter(|c| c.kept(tau)).count()
    }
}

/// Generate candidates for every pool sentence and label and score them.
/// Sentences are processed in parallel; each uses a seed derived from its
/// id, so the output matches sequential execution.
pub fn score_pool(
    pool: &UnlabeledPool,
    generator: &Generator,
    classifier: &ModelParams,
    labels: &[String],
    seed: u64,
) -> Result<ScoredPool> {
    let indices = labels
        .iter()
        .map(|l| label_index(&classifier.label_space, l))
        .collect::<Result<Vec<_>>>()?;
    let per_sentence: Vec<Vec<ScoredCandidate>> = pool
        .examples
        .par_iter()
        .map(|ex| {
            let sentence_seed = seed::derive_str(seed, "ta-sentence", &ex.id);
            let mut out = Vec::new();
            for (label, &k) in labels.iter().zip(&indices) {
                let s = seed::derive_str(sentence_seed, "label", label);
                for c in generate_candidates(generator, label, &ex.segment_a, s)? {
                    out.push(score_one(classifier, &ex.id, &ex.segment_a, &c, k));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(ScoredPool {
        label_space: classifier.label_space.clone(),
        candidates: per_sentence.into_iter().flatten().collect(),
    })
}

/// Filtered synthetic auxiliary-task data.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSet {
    pub label_space: LabelSpace,
    pub examples: Vec<AugmentedExample>,
}

impl SyntheticSet {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn to_dataset(&self, name: &str) -> Result<Dataset> {
        let examples = self
            .examples
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let k = label_index(&self.label_space, &a.label)?;
                Ok(Example::pair(
                    format!("syn-{i}-{}", a.source_id),
                    a.premise.clone(),
                    a.hypothesis.clone(),
                    Some(Label::Class(k)),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(name, self.label_space.clone(), examples)
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for a in &self.examples {
            serde_json::to_writer(&mut w, a)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_jsonl(path: &Path, label_space: LabelSpace) -> Result<SyntheticSet> {
        let reader = BufReader::new(File::open(path)?);
        let mut examples = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let a: AugmentedExample = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: Some(path.to_owned()),
                line: i + 1,
                message: e.to_string(),
            })?;
            label_index(&label_space, &a.label)?;
            examples.push(a);
        }
        Ok(SyntheticSet { label_space, examples })
    }
}

/// Generate, then keep candidates above `tau`.
pub fn build_ta_dataset(
    pool: &UnlabeledPool,
    generator: &Generator,
    classifier: &ModelParams,
    tau: f64,
    labels: &[String],
    seed: u64,
) -> Result<SyntheticSet> {
    let set = score_pool(pool, generator, classifier, labels, seed)?.filter(tau);
    if set.is_empty() && !pool.is_empty() {
        log::warn!("task augmentation kept no examples at tau {tau}");
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauEvaluation {
    pub tau: f64,
    pub kept: usize,
    /// Aux-dev accuracy after fine-tuning on the kept set; absent when
    /// nothing was kept or no comparison was needed.
    pub dev_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSelection {
    pub tau: f64,
    pub evaluations: Vec<TauEvaluation>,
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("tau grid is empty".into()));
    }
    if grid.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Error::Config("tau values must lie in (0, 1)".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("tau grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Aux-dev accuracy of `classifier` fine-tuned on the candidates kept at `tau`.
pub fn tau_dev_score(
    classifier: &ModelParams,
    scored: &ScoredPool,
    aux_dev: &Dataset,
    tau: f64,
    budget: &TrainConfig,
) -> Result<Option<f64>> {
    let kept = scored.filter(tau);
    if kept.is_empty() {
        return Ok(None);
    }
    let tuned = train(classifier, &kept.to_dataset("synthetic")?, budget, None)?;
    evaluate(&tuned.params, aux_dev, &Metric::Accuracy).map(Some)
}

/// Pick the grid value whose filtered set, used to fine-tune a copy of the
/// classifier under `budget`, scores best on `aux_dev`; ties go to the
/// smaller value. Every grid point uses the same training seed.
pub fn select_tau(
    classifier: &ModelParams,
    scored: &ScoredPool,
    aux_dev: &Dataset,
    grid: &[f64],
    budget: &TrainConfig,
) -> Result<TauSelection> {
    validate_grid(grid)?;
    if budget.stopping.needs_dev() {
        return Err(Error::Config("tau selection budget must use fixed-step training".into()));
    }
    if let [tau] = grid {
        return Ok(TauSelection {
            tau: *tau,
            evaluations: vec![TauEvaluation {
                tau: *tau,
                kept: scored.kept_count(*tau),
                dev_score: None,
            }],
        });
    }
    let evaluations = grid
        .par_iter()
        .map(|&tau| {
            Ok(TauEvaluation {
                tau,
                kept: scored.kept_count(tau),
                dev_score: tau_dev_score(classifier, scored, aux_dev, tau, budget)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(f64, f64)> = None;
    for e in &evaluations {
        if let Some(s) = e.dev_score {
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, e.tau));
            }
        }
    }
    let (_, tau) = best.ok_or_else(|| Error::Selection("every tau in the grid kept zero examples".into()))?;
    Ok(TauSelection { tau, evaluations })
}
