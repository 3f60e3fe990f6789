use serde::{Deserialize, Serialize};

use crate::augmentation::{GeneratorSpec, TAConfig};
use crate::corpus::{Dataset, Regime, RegimeOptions, Task};
use crate::selftrain::{FinalFinetune, PoolMix, SelfTrainConfig, SelfTrainMode};
use crate::textmodel::{FeatureConfig, InitScheme, Metric, TrainConfig};
use crate::{Error, Result};

/// Where an arm's starting parameters come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Base {
    /// Fresh parameters from the model's init scheme.
    Init,
    /// Classifier fine-tuned on the original auxiliary data only.
    Itft,
    /// Task-augmented base model.
    Ta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Finetune,
    SelfTrain,
    ConfidenceFilter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmKind {
    Baseline,
    Itft,
    Ta,
    St,
    Strata,
    ConfidenceFilterSt,
}

impl ArmKind {
    pub fn parts(self) -> (Base, Method) {
        match self {
            ArmKind::Baseline => (Base::Init, Method::Finetune),
            ArmKind::Itft => (Base::Itft, Method::Finetune),
            ArmKind::Ta => (Base::Ta, Method::Finetune),
            ArmKind::St => (Base::Init, Method::SelfTrain),
            ArmKind::Strata => (Base::Ta, Method::SelfTrain),
            ArmKind::ConfidenceFilterSt => (Base::Init, Method::ConfidenceFilter),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    pub name: String,
    pub kind: ArmKind,
    /// Overrides the kind's base model.
    #[serde(default)]
    pub base: Option<Base>,
    /// Unlabeled pool for self-training arms.
    #[serde(default = "default_pool")]
    pub pool: PoolMix,
    /// Examples added per iteration by confidence filtering.
    #[serde(default = "default_batch")]
    pub batch: usize,
}

fn default_pool() -> PoolMix {
    PoolMix::InOnly
}

fn default_batch() -> usize {
    32
}

impl ArmSpec {
    pub fn new(name: impl Into<String>, kind: ArmKind) -> ArmSpec {
        ArmSpec {
            name: name.into(),
            kind,
            base: None,
            pool: PoolMix::InOnly,
            batch: default_batch(),
        }
    }

    pub fn with_pool(mut self, pool: PoolMix) -> ArmSpec {
        self.pool = pool;
        self
    }

    pub fn with_base(mut self, base: Base) -> ArmSpec {
        self.base = Some(base);
        self
    }

    pub fn base(&self) -> Base {
        self.base.unwrap_or(self.kind.parts().0)
    }

    pub fn method(&self) -> Method {
        self.kind.parts().1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DevMode {
    WithDev,
    /// No dev set is consulted: fixed-step training with checkpoint
    /// averaging and an explicit final fine-tune decision.
    DevFree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub features: FeatureConfig,
    pub init: InitScheme,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            features: FeatureConfig::default(),
            init: InitScheme::Zeros,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub regime: Regime,
    pub regime_options: RegimeOptions,
    pub arms: Vec<ArmSpec>,
    pub restarts: usize,
    /// Test metric; defaults to the label space's metric.
    pub metric: Option<Metric>,
    pub dev_mode: DevMode,
    pub master_seed: u64,
    /// Also report the mean of the three best restarts.
    pub top3: bool,
    /// Record per-iteration labeling series for self-training arms.
    pub track_series: bool,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub self_training: SelfTrainConfig,
    pub augmentation: TAConfig,
    pub generator: GeneratorSpec,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "experiment".into(),
            regime: Regime::few_shot(Regime::FEW_SHOT_DEFAULT),
            regime_options: RegimeOptions::default(),
            arms: vec![
                ArmSpec::new("baseline", ArmKind::Baseline),
                ArmSpec::new("st", ArmKind::St),
            ],
            restarts: 10,
            metric: None,
            dev_mode: DevMode::WithDev,
            master_seed: 0,
            top3: false,
            track_series: true,
            model: ModelSpec::default(),
            train: TrainConfig::default(),
            self_training: SelfTrainConfig::default(),
            augmentation: TAConfig::default(),
            generator: GeneratorSpec::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn needs_augmentation(&self) -> bool {
        self.arms.iter().any(|a| matches!(a.base(), Base::Ta | Base::Itft))
    }

    pub fn needs_ood(&self) -> bool {
        self.arms
            .iter()
            .any(|a| a.method() != Method::Finetune && a.pool != PoolMix::InOnly)
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms.is_empty() {
            return Err(Error::Config("an experiment needs at least one arm".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        let mut names = std::collections::HashSet::new();
        for a in &self.arms {
            if !names.insert(a.name.as_str()) {
                return Err(Error::Config(format!("duplicate arm name `{}`", a.name)));
            }
            if a.method() == Method::ConfidenceFilter && a.batch == 0 {
                return Err(Error::Config(format!("arm `{}` needs a positive batch", a.name)));
            }
        }
        self.model.features.validate()?;
        self.train.validate()?;
        self.self_training.validate()?;
        if self.self_training.mode != SelfTrainMode::Broad {
            return Err(Error::Config(
                "select confidence filtering per arm with kind confidence_filter_st".into(),
            ));
        }
        if self.needs_augmentation() {
            self.augmentation.validate()?;
            self.generator.validate()?;
        }
        if self.dev_mode == DevMode::DevFree {
            if self.train.stopping.needs_dev() {
                return Err(Error::Config(
                    "dev-free mode forbids early stopping; use fixed_steps".into(),
                ));
            }
            let uses_st = self.arms.iter().any(|a| a.method() == Method::SelfTrain);
            if uses_st && self.self_training.final_finetune == FinalFinetune::AutoByDev {
                return Err(Error::Config(
                    "dev-free mode needs final_finetune set to on or off".into(),
                ));
            }
            if uses_st && self.self_training.dev_patience.is_some() {
                return Err(Error::Config("dev-free mode forbids dev_patience".into()));
            }
        }
        Ok(())
    }
}

/// The data an experiment runs on.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub task: Task,
    /// Labeled auxiliary-task train and dev sets, for augmentation arms.
    pub aux: Option<(Dataset, Dataset)>,
    /// Labeled out-of-domain corpus; its labels are only used to score
    /// pseudo-labels.
    pub ood: Option<Dataset>,
}

impl ExperimentData {
    pub fn new(task: Task) -> ExperimentData {
        ExperimentData {
            task,
            aux: None,
            ood: None,
        }
    }

    pub fn check(&self, spec: &ExperimentSpec) -> Result<()> {
        if spec.needs_augmentation() && self.aux.is_none() {
            return Err(Error::Config("augmentation arms need auxiliary data".into()));
        }
        if spec.needs_ood() && self.ood.is_none() {
            return Err(Error::Config("out-of-domain pool arms need an ood dataset".into()));
        }
        if let Some(ood) = &self.ood {
            if &ood.label_space != self.task.label_space() {
                return Err(Error::Type("ood data must share the task's label space".into()));
            }
        }
        if let Some(m) = &spec.metric {
            m.check_compatible(self.task.label_space())?;
        }
        Ok(())
    }
}
