use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::report::{
    track_labeling_series, ArmError, ArmReport, AugmentationSummary, CurveReport, RunReport,
    SelfTrainSummary, SplitSummary, Timing, REPORT_SCHEMA_VERSION,
};
use super::spec::{ArmSpec, Base, DevMode, ExperimentData, ExperimentSpec, Method};
use crate::augmentation::{default_carry, run_task_augmentation, Generator, TaOutcome};
use crate::corpus::{sample_regime, strip_labels, Regime, RegimeSplit, UnlabeledPool};
use crate::selftrain::{
    confidence_filter_selftrain, mix_gold, mix_pools, self_train, SelfTrainData, SelfTrainOutput,
};
use crate::textmodel::{evaluate, init_params, train, Metric, ModelParams, TrainConfig};
use crate::{seed, Error, Result};

/// Seed of restart `r`.
pub fn restart_seed(master_seed: u64, r: usize) -> u64 {
    seed::derive(master_seed, "restart", r as u64)
}

/// Content hash of a split's id sets.
pub fn split_hash(split: &RegimeSplit) -> String {
    let mut h = Sha256::new();
    let parts: [(&str, Vec<&str>); 4] = [
        ("train", split.train.ids().collect()),
        ("dev", split.dev.ids().collect()),
        ("test", split.test.ids().collect()),
        ("pool", split.pool.ids().collect()),
    ];
    for (name, ids) in parts {
        h.update(name.as_bytes());
        h.update([0]);
        for id in ids {
            h.update(id.as_bytes());
            h.update([0x1f]);
        }
        h.update([0x1e]);
    }
    hex::encode(h.finalize())
}

struct Context<'a> {
    spec: &'a ExperimentSpec,
    data: &'a ExperimentData,
    ta: Option<TaOutcome>,
    ood_pool: UnlabeledPool,
    metric: Metric,
}

struct ArmOutcome {
    score: f64,
    self_training: Option<SelfTrainSummary>,
}

impl Context<'_> {
    fn base(&self, arm: &ArmSpec, restart_seed: u64) -> Result<ModelParams> {
        let space = self.data.task.label_space();
        match arm.base() {
            Base::Init => init_params(
                space,
                &self.spec.model.features,
                seed::derive(restart_seed, "init", 0),
                self.spec.model.init,
            ),
            Base::Itft => {
                let ta = self.ta.as_ref().expect("validated");
                ta.aux_classifier
                    .swap_head(space, &default_carry(&ta.aux_classifier.label_space, space))
            }
            Base::Ta => Ok(self.ta.as_ref().expect("validated").f0.clone()),
        }
    }

    fn train_config(&self, restart_seed: u64) -> TrainConfig {
        TrainConfig {
            seed: seed::derive(restart_seed, "train", 0),
            metric: Some(self.metric.clone()),
            ..self.spec.train.clone()
        }
    }

    fn run_arm(&self, arm: &ArmSpec, split: &RegimeSplit, restart_seed: u64) -> Result<ArmOutcome> {
        let base = self.base(arm, restart_seed)?;
        let cfg = self.train_config(restart_seed);
        let dev = match self.spec.dev_mode {
            DevMode::WithDev => Some(&split.dev).filter(|d| !d.is_empty()),
            DevMode::DevFree => None,
        };
        if arm.method() == Method::Finetune {
            let model = train(&base, &split.train, &cfg, dev)?.params;
            return Ok(ArmOutcome {
                score: evaluate(&model, &split.test, &self.metric)?,
                self_training: None,
            });
        }

        let pool = mix_pools(&split.pool, &self.ood_pool, arm.pool)?;
        let in_gold = self.data.task.train.gold_labels();
        let out_gold = self.data.ood.as_ref().map(|d| d.gold_labels()).unwrap_or_default();
        let gold = mix_gold(&in_gold, &out_gold, arm.pool);
        let st_data = SelfTrainData {
            labeled: &split.train,
            pool: &pool,
            dev,
            test: Some(&split.test),
            pool_gold: Some(&gold),
        };
        let SelfTrainOutput { result, final_model } = match arm.method() {
            Method::SelfTrain => self_train(&base, st_data, &self.spec.self_training, &cfg, restart_seed)?,
            _ => confidence_filter_selftrain(&base, st_data, arm.batch, &self.spec.self_training, &cfg, restart_seed)?,
        };
        let series = if self.spec.track_series {
            Some(track_labeling_series(&result, &base.label_space, &gold)?)
        } else {
            None
        };
        Ok(ArmOutcome {
            score: evaluate(&final_model, &split.test, &self.metric)?,
            self_training: Some(SelfTrainSummary {
                iterations: result.per_iteration.len(),
                converged_at: result.converged_at,
                finetune_on_labeled: result.finetune_on_labeled,
                pool_size: result.pool_size,
                final_pool_score: result.final_pool_score,
                series,
            }),
        })
    }
}

struct RestartRun {
    summary: SplitSummary,
    arms: Vec<(Result<ArmOutcome>, f64)>,
}

fn augment(spec: &ExperimentSpec, data: &ExperimentData) -> Result<Option<TaOutcome>> {
    if !spec.needs_augmentation() {
        return Ok(None);
    }
    let (aux_train, aux_dev) = data.aux.as_ref().expect("checked");
    let generator = Generator::new(spec.generator.clone())?;
    let sentences = strip_labels(&data.task.train);
    let cfg = TrainConfig {
        metric: None,
        ..spec.train.clone()
    };
    run_task_augmentation(
        aux_train,
        aux_dev,
        &sentences,
        &generator,
        &spec.model.features,
        data.task.label_space(),
        &spec.augmentation,
        &cfg,
        seed::derive(spec.master_seed, "augmentation", 0),
    )
    .map(Some)
}

/// Run every arm on every restart. Task augmentation runs once, up front;
/// restarts run in parallel and are collected in restart order, so the
/// report does not depend on scheduling.
pub fn run_experiment(spec: &ExperimentSpec, data: &ExperimentData) -> Result<(RunReport, Timing)> {
    spec.validate()?;
    data.check(spec)?;
    let started = Instant::now();
    let space = data.task.label_space();
    let metric = spec.metric.clone().unwrap_or_else(|| Metric::default_for(space));

    let ta_started = Instant::now();
    let ta = augment(spec, data)?;
    let augmentation_seconds = ta_started.elapsed().as_secs_f64();

    let ctx = Context {
        spec,
        data,
        ood_pool: data
            .ood
            .as_ref()
            .map(strip_labels)
            .unwrap_or_else(|| UnlabeledPool::empty("ood")),
        ta,
        metric: metric.clone(),
    };
    let seeds: Vec<u64> = (0..spec.restarts).map(|r| restart_seed(spec.master_seed, r)).collect();

    let runs: Vec<RestartRun> = seeds
        .par_iter()
        .enumerate()
        .map(|(r, &s)| {
            let split = sample_regime(&data.task, spec.regime, s, &spec.regime_options)?;
            let summary = SplitSummary {
                restart: r,
                seed: s,
                hash: split_hash(&split),
                train: split.train.len(),
                dev: split.dev.len(),
                test: split.test.len(),
                pool: split.pool.len(),
            };
            let arms = spec
                .arms
                .iter()
                .map(|arm| {
                    let t = Instant::now();
                    let out = ctx.run_arm(arm, &split, s);
                    if let Err(e) = &out {
                        log::warn!("arm `{}` failed on restart {r}: {e}", arm.name);
                    }
                    (out, t.elapsed().as_secs_f64())
                })
                .collect();
            Ok(RestartRun { summary, arms })
        })
        .collect::<Result<_>>()?;

    let mut timing = Timing {
        augmentation_seconds,
        ..Default::default()
    };
    let mut arms = Vec::with_capacity(spec.arms.len());
    for (i, arm) in spec.arms.iter().enumerate() {
        let mut report = ArmReport {
            name: arm.name.clone(),
            kind: arm.kind,
            base: arm.base(),
            pool: arm.pool,
            scores: Vec::new(),
            mean: None,
            std: None,
            top3_mean: None,
            split_hashes: Vec::new(),
            self_training: Vec::new(),
            errors: Vec::new(),
        };
        let mut st = Vec::new();
        for run in &runs {
            let (out, secs) = &run.arms[i];
            *timing.arms.entry(arm.name.clone()).or_default() += secs;
            report.split_hashes.push(run.summary.hash.clone());
            match out {
                Ok(o) => {
                    report.scores.push(Some(o.score));
                    st.push(o.self_training.clone());
                }
                Err(e) => {
                    report.scores.push(None);
                    st.push(None);
                    report.errors.push(ArmError {
                        restart: run.summary.restart,
                        code: e.code().to_owned(),
                        message: e.to_string(),
                    });
                }
            }
        }
        if arm.method() != Method::Finetune {
            report.self_training = st;
        }
        report.aggregate(spec.top3);
        arms.push(report);
    }

    let augmentation = ctx.ta.as_ref().map(|ta| AugmentationSummary {
        tau: ta.selection.tau,
        tau_evaluations: ta.selection.evaluations.clone(),
        candidates_kept: ta.synthetic.len(),
        aux_dev_score: ta.aux_dev_score,
        aux_classifier_hash: ta.aux_classifier.content_hash(),
        f0_hash: ta.f0.content_hash(),
    });
    let partial = arms.iter().any(|a| !a.errors.is_empty());
    let k = match spec.regime {
        Regime::FewShot { per_class } => Some(per_class),
        Regime::Limited { size } => Some(size),
        Regime::Full => None,
    };
    timing.total_seconds = started.elapsed().as_secs_f64();
    Ok((
        RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            spec: spec.clone(),
            task: data.task.name.clone(),
            metric,
            k,
            restart_seeds: seeds,
            splits: runs.into_iter().map(|r| r.summary).collect(),
            augmentation,
            arms,
            partial,
        },
        timing,
    ))
}

/// Run the experiment once per few-shot `k`, plus once on the full data
/// when `reference` is set.
pub fn sweep_k(
    spec: &ExperimentSpec,
    data: &ExperimentData,
    ks: &[usize],
    reference: bool,
) -> Result<(CurveReport, Vec<RunReport>, Timing)> {
    if !matches!(spec.regime, Regime::FewShot { .. }) {
        return Err(Error::Config("a k sweep needs the few_shot regime".into()));
    }
    if ks.is_empty() || ks.windows(2).any(|w| w[0] >= w[1]) || ks[0] == 0 {
        return Err(Error::Config("sweep ks must be positive and strictly ascending".into()));
    }
    let mut reports = Vec::new();
    let mut timing = Timing::default();
    let mut rows = Vec::new();
    let mut aggregates = Vec::new();
    for &k in ks {
        let s = ExperimentSpec {
            regime: Regime::few_shot(k),
            ..spec.clone()
        };
        let (report, t) = run_experiment(&s, data)?;
        rows.extend(report.score_rows());
        aggregates.extend(report.aggregate_rows());
        timing.merge(&t);
        reports.push(report);
    }
    let mut reference_rows = Vec::new();
    if reference {
        let s = ExperimentSpec {
            regime: Regime::Full,
            ..spec.clone()
        };
        let (report, t) = run_experiment(&s, data)?;
        rows.extend(report.score_rows());
        reference_rows = report.aggregate_rows();
        timing.merge(&t);
        reports.push(report);
    }
    Ok((
        CurveReport {
            ks: ks.to_vec(),
            rows,
            aggregates,
            reference: reference_rows,
        },
        reports,
        timing,
    ))
}
