use std::path::{Path, PathBuf};

use semisup::augmentation::{GeneratorSpec, TAConfig};
use semisup::corpus::{LabelSpace, NliDomain, PairNliParams, Regime, RegimeOptions, SynthSpec};
use semisup::harness::{ArmSpec, DevMode, ExperimentSpec, ModelSpec};
use semisup::selftrain::SelfTrainConfig;
use semisup::textmodel::{FeatureConfig, InitScheme, Metric, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub datasets: DatasetsSection,
    pub generator: GeneratorSpec,
    pub augmentation: TAConfig,
    pub model: ModelSection,
    pub self_training: SelfTrainConfig,
    pub experiment: ExperimentSection,
}

impl Default for Config {
    fn default() -> Self {
        let generator = GeneratorSpec {
            samples_per_input: 20,
            ..GeneratorSpec::default()
        };
        Config {
            datasets: DatasetsSection::default(),
            generator,
            augmentation: TAConfig::default(),
            model: ModelSection::default(),
            self_training: SelfTrainConfig::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetsSection {
    pub task: TaskSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aux: Option<AuxSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ood: Option<OodSource>,
    /// Sentences for `augment`; defaults to the task's training text.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unlabeled: Option<PathBuf>,
}

/// Either a synthetic family or files on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSource {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_space: Option<LabelSpace>,
    pub header: bool,
    pub pair: bool,
}

impl Default for TaskSource {
    fn default() -> Self {
        TaskSource {
            synth: Some(SynthSpec::from_name("keyword-sentiment").expect("shipped family")),
            train_size: 2272,
            test_size: 1000,
            seed: 7,
            name: None,
            train: None,
            test: None,
            dev: None,
            label_space: None,
            header: false,
            pair: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuxSource {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
    pub train_size: usize,
    pub dev_size: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev: Option<PathBuf>,
    /// Classes of file-based auxiliary data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
}

impl Default for AuxSource {
    fn default() -> Self {
        AuxSource {
            synth: Some(SynthSpec::PairOverlapNli(PairNliParams {
                domain: NliDomain::General,
                ..Default::default()
            })),
            train_size: 3000,
            dev_size: 500,
            seed: 21,
            train: None,
            dev: None,
            classes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OodSource {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
    pub size: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for OodSource {
    fn default() -> Self {
        OodSource {
            synth: None,
            size: 2000,
            seed: 31,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub features: FeatureConfig,
    pub init: InitScheme,
    pub train: TrainConfig,
}

impl Default for ModelSection {
    fn default() -> Self {
        let spec = ModelSpec::default();
        ModelSection {
            features: spec.features,
            init: spec.init,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub regime: Regime,
    pub regime_options: RegimeOptions,
    pub arms: Vec<ArmSpec>,
    pub restarts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    pub dev_mode: DevMode,
    pub master_seed: u64,
    pub top3: bool,
    pub track_series: bool,
    /// Few-shot sizes to sweep; empty runs a single experiment.
    pub sweep: Vec<usize>,
    /// Add a full-data reference run to a sweep.
    pub reference: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let d = ExperimentSpec::default();
        ExperimentSection {
            name: d.name,
            regime: d.regime,
            regime_options: d.regime_options,
            arms: d.arms,
            restarts: d.restarts,
            metric: d.metric,
            dev_mode: d.dev_mode,
            master_seed: d.master_seed,
            top3: d.top3,
            track_series: d.track_series,
            sweep: Vec::new(),
            reference: false,
        }
    }
}

impl Config {
    pub fn experiment_spec(&self) -> ExperimentSpec {
        let e = &self.experiment;
        ExperimentSpec {
            name: e.name.clone(),
            regime: e.regime,
            regime_options: e.regime_options.clone(),
            arms: e.arms.clone(),
            restarts: e.restarts,
            metric: e.metric.clone(),
            dev_mode: e.dev_mode,
            master_seed: e.master_seed,
            top3: e.top3,
            track_series: e.track_series,
            model: ModelSpec {
                features: self.model.features.clone(),
                init: self.model.init,
            },
            train: self.model.train.clone(),
            self_training: self.self_training.clone(),
            augmentation: self.augmentation.clone(),
            generator: self.generator.clone(),
        }
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self).map_err(|e| CliError::runtime("serialize", e.to_string()))
    }
}

/// Load, interpolate, override and deserialize a config.
pub fn load(path: Option<&Path>, sets: &[String], seed: Option<u64>) -> Result<Config, CliError> {
    let mut root = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::validation("config", format!("cannot read {}: {e}", p.display()))
                    .with_context(json!({ "path": p }))
            })?;
            text.parse::<toml::Table>().map_err(|e| {
                CliError::validation("parse", e.message().to_owned())
                    .with_context(json!({ "path": p, "span": e.span().map(|s| [s.start, s.end]) }))
            })?
        }
        None => toml::Table::new(),
    };
    interpolate_table(&mut root, "", &|name| std::env::var(name).ok())?;
    for s in sets {
        apply_set(&mut root, s)?;
    }
    if let Some(seed) = seed {
        let value = i64::try_from(seed)
            .map_err(|_| CliError::validation("validation", "--seed must fit in a signed 64-bit integer"))?;
        section(&mut root, "experiment")?.insert("master_seed".into(), toml::Value::Integer(value));
    }
    deserialize(toml::Value::Table(root))
}

fn deserialize(value: toml::Value) -> Result<Config, CliError> {
    serde_path_to_error::deserialize::<_, Config>(value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.inner().to_string();
        let message = inner.lines().next().unwrap_or_default().to_owned();
        match unknown_field(&message) {
            Some((key, expected)) => {
                let parent = path.rsplit_once('.').map(|(p, _)| p).unwrap_or("");
                let full = if parent.is_empty() || parent == "." {
                    key.clone()
                } else {
                    format!("{parent}.{key}")
                };
                let nearest = nearest_key(&key, &expected);
                let hint = nearest
                    .as_ref()
                    .map(|n| format!("; did you mean `{n}`?"))
                    .unwrap_or_default();
                CliError::validation("validation", format!("unknown config key `{full}`{hint}"))
                    .with_context(json!({ "key": full, "nearest": nearest, "expected": expected }))
            }
            None => CliError::validation("validation", format!("invalid config at `{path}`: {message}"))
                .with_context(json!({ "key": path })),
        }
    })
}

/// Parse serde's "unknown field `x`, expected ..." message.
fn unknown_field(message: &str) -> Option<(String, Vec<String>)> {
    let rest = message.strip_prefix("unknown field ")?;
    let mut quoted = rest.split('`').skip(1).step_by(2).map(str::to_owned);
    let key = quoted.next()?;
    Some((key, quoted.collect()))
}

pub fn nearest_key(key: &str, candidates: &[String]) -> Option<String> {
    candidates
        .iter()
        .map(|c| (strsim::jaro_winkler(key, c), c))
        .filter(|(score, _)| *score > 0.6)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c.clone())
}

fn interpolate_table(
    table: &mut toml::Table,
    prefix: &str,
    lookup: &dyn Fn(&str) -> Option<String>,
) -> Result<(), CliError> {
    for (k, v) in table.iter_mut() {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        interpolate_value(v, &path, lookup)?;
    }
    Ok(())
}

fn interpolate_value(
    value: &mut toml::Value,
    path: &str,
    lookup: &dyn Fn(&str) -> Option<String>,
) -> Result<(), CliError> {
    match value {
        toml::Value::String(s) => *s = interpolate(s, path, lookup)?,
        toml::Value::Array(items) => {
            for (i, v) in items.iter_mut().enumerate() {
                interpolate_value(v, &format!("{path}[{i}]"), lookup)?;
            }
        }
        toml::Value::Table(t) => interpolate_table(t, path, lookup)?,
        _ => {}
    }
    Ok(())
}

/// Expand `${NAME}` references.
pub fn interpolate(text: &str, path: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Result<String, CliError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find('}').ok_or_else(|| {
            CliError::validation("config", format!("unterminated `${{` in `{path}`")).with_context(json!({ "key": path }))
        })?;
        let name = &after[..end];
        let value = lookup(name).ok_or_else(|| {
            CliError::validation("config", format!("environment variable `{name}` is not set (used by `{path}`)"))
                .with_context(json!({ "key": path, "variable": name }))
        })?;
        out.push_str(&value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn section<'a>(root: &'a mut toml::Table, name: &str) -> Result<&'a mut toml::Table, CliError> {
    root.entry(name.to_owned())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| CliError::validation("validation", format!("`{name}` must be a table")))
}

/// Apply one `section.key=value` override. The value is read as TOML,
/// falling back to a bare string.
pub fn apply_set(root: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let bad = || {
        CliError::validation("usage", format!("--set expects section.key=value, got `{assignment}`"))
            .with_context(json!({ "set": assignment }))
    };
    let (key, raw) = assignment.split_once('=').ok_or_else(bad)?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.len() < 2 || parts.iter().any(|p| p.is_empty()) {
        return Err(bad());
    }
    let value = parse_value(raw.trim());
    let (last, parents) = parts.split_last().expect("non-empty");
    let mut table = root;
    for p in parents {
        table = section(table, p)?;
    }
    table.insert((*last).to_owned(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}
