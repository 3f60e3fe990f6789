use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::spec::{ArmKind, Base, ExperimentSpec};
use crate::augmentation::TauEvaluation;
use crate::corpus::{GoldLabels, LabelSpace};
use crate::selftrain::{align, PoolMix, SelfTrainResult};
use crate::textmodel::{accuracy, Metric};
use crate::Result;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Mean of the three largest values (all of them if fewer).
pub fn top3_mean(values: &[f64]) -> Option<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.truncate(3);
    mean_std(&sorted).map(|(m, _)| m)
}

/// Per-iteration series of one self-training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingSeries {
    pub dev: Vec<Option<f64>>,
    pub test: Vec<Option<f64>>,
    /// Labeling score of each iteration's pseudo-labels on the full pool.
    pub pool: Vec<f64>,
    /// Accuracy of each added batch (confidence filtering only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub added: Vec<f64>,
}

/// Rebuild the labeling series of a run from its stored pseudo-labels and
/// the pool's gold labels.
pub fn track_labeling_series(result: &SelfTrainResult, space: &LabelSpace, pool_gold: &GoldLabels) -> Result<LabelingSeries> {
    let pool = result
        .pseudo_labels
        .iter()
        .map(|set| set.labeling_score(space, pool_gold))
        .collect::<Result<Vec<_>>>()?;
    let mut added = Vec::new();
    for rec in result.per_iteration.iter().filter(|r| !r.added.is_empty()) {
        let (p, g) = align(rec.added.iter().map(|e| (e.id.as_str(), e.label)), pool_gold)?;
        let p: Vec<usize> = p.iter().filter_map(|l| l.class()).collect();
        let g: Vec<usize> = g.iter().filter_map(|l| l.class()).collect();
        added.push(accuracy(&p, &g)?);
    }
    Ok(LabelingSeries {
        dev: result.per_iteration.iter().map(|r| r.dev_metric).collect(),
        test: result.per_iteration.iter().map(|r| r.test_metric).collect(),
        pool,
        added,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmError {
    pub restart: usize,
    pub code: String,
    pub message: String,
}

/// Self-training details of one restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTrainSummary {
    pub iterations: usize,
    pub converged_at: Option<usize>,
    pub finetune_on_labeled: bool,
    pub pool_size: usize,
    pub final_pool_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<LabelingSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub name: String,
    pub kind: ArmKind,
    pub base: Base,
    pub pool: PoolMix,
    /// One entry per restart; `None` where the arm failed.
    pub scores: Vec<Option<f64>>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top3_mean: Option<f64>,
    /// Content hash of the split each restart ran on.
    pub split_hashes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub self_training: Vec<Option<SelfTrainSummary>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<ArmError>,
}

impl ArmReport {
    pub fn successful_scores(&self) -> Vec<f64> {
        self.scores.iter().flatten().copied().collect()
    }

    /// Recompute the aggregates from the raw scores.
    pub fn aggregate(&mut self, top3: bool) {
        let ok = self.successful_scores();
        let ms = mean_std(&ok);
        self.mean = ms.map(|m| m.0);
        self.std = ms.map(|m| m.1);
        self.top3_mean = if top3 { top3_mean(&ok) } else { None };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub restart: usize,
    pub seed: u64,
    pub hash: String,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub pool: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSummary {
    pub tau: f64,
    pub tau_evaluations: Vec<TauEvaluation>,
    pub candidates_kept: usize,
    pub aux_dev_score: f64,
    pub aux_classifier_hash: String,
    pub f0_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub spec: ExperimentSpec,
    pub task: String,
    pub metric: Metric,
    /// Examples per class (few-shot), the labeled size (limited) or `None`.
    pub k: Option<usize>,
    pub restart_seeds: Vec<u64>,
    pub splits: Vec<SplitSummary>,
    pub augmentation: Option<AugmentationSummary>,
    pub arms: Vec<ArmReport>,
    /// Some arm failed on some restart.
    pub partial: bool,
}

impl RunReport {
    pub fn arm(&self, name: &str) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<RunReport> {
        Ok(serde_json::from_str(text)?)
    }

    /// Long-format rows: arm, k, restart, score.
    pub fn score_rows(&self) -> Vec<CurveRow> {
        self.arms
            .iter()
            .flat_map(|a| {
                a.scores.iter().enumerate().map(move |(r, s)| CurveRow {
                    arm: a.name.clone(),
                    k: self.k,
                    restart: r,
                    score: *s,
                })
            })
            .collect()
    }

    pub fn aggregate_rows(&self) -> Vec<AggregateRow> {
        self.arms
            .iter()
            .map(|a| AggregateRow {
                arm: a.name.clone(),
                k: self.k,
                mean: a.mean,
                std: a.std,
            })
            .collect()
    }
}

/// Wall-clock measurements, kept apart from the deterministic report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub augmentation_seconds: f64,
    /// Seconds per arm, summed over restarts.
    pub arms: BTreeMap<String, f64>,
    pub total_seconds: f64,
}

impl Timing {
    pub fn merge(&mut self, other: &Timing) {
        self.augmentation_seconds += other.augmentation_seconds;
        for (k, v) in &other.arms {
            *self.arms.entry(k.clone()).or_default() += v;
        }
        self.total_seconds += other.total_seconds;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub arm: String,
    /// `None` marks the full-data reference.
    pub k: Option<usize>,
    pub restart: usize,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub arm: String,
    pub k: Option<usize>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub ks: Vec<usize>,
    pub rows: Vec<CurveRow>,
    pub aggregates: Vec<AggregateRow>,
    /// Full-data aggregates, when requested.
    pub reference: Vec<AggregateRow>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[1.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        assert_eq!(mean_std(&[0.7]).unwrap().1, 0.0);
        assert!(mean_std(&[]).is_none());
    }

    #[test]
    fn top_three() {
        assert_eq!(top3_mean(&[1.0, 5.0, 2.0, 4.0, 3.0]), Some(4.0));
        assert_eq!(top3_mean(&[2.0]), Some(2.0));
    }
}
