use serde::{Deserialize, Serialize};

use super::filter::{score_pool, select_tau, validate_grid, SyntheticSet, TauSelection};
use super::generator::Generator;
use crate::corpus::{Dataset, LabelSpace, UnlabeledPool};
use crate::textmodel::{
    evaluate, init_params, train, FeatureConfig, InitScheme, Metric, ModelParams, Stopping,
    TrainConfig,
};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TAConfig {
    pub tau_grid: Vec<f64>,
    /// Train on the synthetic data first, then on the original auxiliary
    /// data; otherwise train once on their concatenation.
    pub two_stage: bool,
    pub include_original_aux: bool,
    /// Emit reversed pairs when exporting text-to-text training data.
    pub include_reversed: bool,
    /// Fixed-step budget of each tau-selection fine-tune.
    pub select_steps: usize,
}

impl Default for TAConfig {
    fn default() -> Self {
        TAConfig {
            tau_grid: vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            two_stage: true,
            include_original_aux: true,
            include_reversed: true,
            select_steps: 200,
        }
    }
}

impl TAConfig {
    pub fn validate(&self) -> Result<()> {
        validate_grid(&self.tau_grid)?;
        if self.select_steps == 0 {
            return Err(Error::Config("select_steps must be positive".into()));
        }
        Ok(())
    }

    /// Training config for tau selection: `base` with a fixed step budget.
    pub fn select_budget(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            stopping: Stopping::FixedSteps {
                total: self.select_steps,
                checkpoint_every: self.select_steps,
                average_last: 1,
            },
            ..base.clone()
        }
    }
}

/// Head mapping that carries every target class also present, by name, in
/// the auxiliary label space.
pub fn default_carry(aux: &LabelSpace, target: &LabelSpace) -> Vec<(String, Vec<String>)> {
    target
        .classes()
        .iter()
        .filter(|c| aux.class_index(c).is_some())
        .map(|c| (c.clone(), vec![c.clone()]))
        .collect()
}

/// Intermediate fine-tuning on synthetic and original auxiliary data,
/// returning the auxiliary model before the head swap.
pub fn intermediate_train(
    init: &ModelParams,
    synthetic: &Dataset,
    original_aux: Option<&Dataset>,
    ta: &TAConfig,
    train_config: &TrainConfig,
    aux_dev: Option<&Dataset>,
) -> Result<ModelParams> {
    let aux = original_aux.filter(|d| ta.include_original_aux && !d.is_empty());
    match (synthetic.is_empty(), aux) {
        (true, None) => Err(Error::Config(
            "intermediate fine-tuning needs synthetic or original auxiliary data".into(),
        )),
        (true, Some(aux)) => Ok(train(init, aux, train_config, aux_dev)?.params),
        (false, None) => Ok(train(init, synthetic, train_config, aux_dev)?.params),
        (false, Some(aux)) if ta.two_stage => {
            let first = train(init, synthetic, train_config, aux_dev)?.params;
            Ok(train(&first, aux, train_config, aux_dev)?.params)
        }
        (false, Some(aux)) => {
            let both = synthetic.concat(aux, "synthetic+aux")?;
            Ok(train(init, &both, train_config, aux_dev)?.params)
        }
    }
}

/// [`intermediate_train`] followed by the head swap to `target`, giving f0.
#[allow(clippy::too_many_arguments)]
pub fn intermediate_finetune(
    init: &ModelParams,
    synthetic: &Dataset,
    original_aux: Option<&Dataset>,
    target: &LabelSpace,
    carry: &[(String, Vec<String>)],
    ta: &TAConfig,
    train_config: &TrainConfig,
    aux_dev: Option<&Dataset>,
) -> Result<ModelParams> {
    intermediate_train(init, synthetic, original_aux, ta, train_config, aux_dev)?.swap_head(target, carry)
}

/// Everything produced by one task-augmentation run.
#[derive(Debug, Clone)]
pub struct TaOutcome {
    /// Classifier trained on the original auxiliary data; it filters the
    /// candidates and, after a head swap, is the plain intermediate
    /// fine-tuning baseline.
    pub aux_classifier: ModelParams,
    pub selection: TauSelection,
    pub synthetic: SyntheticSet,
    /// The auxiliary model after intermediate fine-tuning.
    pub aux_model: ModelParams,
    pub aux_dev_score: f64,
    /// Base model for the target task.
    pub f0: ModelParams,
}

/// Full task augmentation: train the auxiliary classifier, overgenerate
/// from `sentences`, select tau, filter, fine-tune and swap the head.
#[allow(clippy::too_many_arguments)]
pub fn run_task_augmentation(
    aux_train: &Dataset,
    aux_dev: &Dataset,
    sentences: &UnlabeledPool,
    generator: &Generator,
    features: &FeatureConfig,
    target: &LabelSpace,
    ta: &TAConfig,
    train_config: &TrainConfig,
    seed: u64,
) -> Result<TaOutcome> {
    ta.validate()?;
    if !aux_train.label_space.is_categorical() {
        return Err(Error::Type("the auxiliary task must be categorical".into()));
    }
    let cfg = TrainConfig {
        seed: seed::derive(seed, "aux-train", 0),
        ..train_config.clone()
    };
    let dev = Some(aux_dev).filter(|d| !d.is_empty());
    let init = init_params(&aux_train.label_space, features, 0, InitScheme::Zeros)?;
    let aux_classifier = train(&init, aux_train, &cfg, dev)?.params;

    let labels = aux_train.label_space.classes().to_vec();
    let scored = score_pool(sentences, generator, &aux_classifier, &labels, seed::derive(seed, "generate", 0))?;
    let selection = select_tau(&aux_classifier, &scored, aux_dev, &ta.tau_grid, &ta.select_budget(&cfg))?;
    let synthetic = scored.filter(selection.tau);
    log::info!(
        "task augmentation: {} candidates, {} kept at tau {}",
        scored.candidates.len(),
        synthetic.len(),
        selection.tau
    );

    let aux_model = intermediate_train(&init, &synthetic.to_dataset("synthetic")?, Some(aux_train), ta, &cfg, dev)?;
    let aux_dev_score = evaluate(&aux_model, aux_dev, &Metric::Accuracy)?;
    let f0 = aux_model.swap_head(target, &default_carry(&aux_train.label_space, target))?;
    Ok(TaOutcome {
        aux_classifier,
        selection,
        synthetic,
        aux_model,
        aux_dev_score,
        f0,
    })
}
