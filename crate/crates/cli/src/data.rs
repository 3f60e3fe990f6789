use std::path::Path;

use semisup::corpus::{
    load_dataset, synth_corpus, DataFormat, Dataset, LabelSpace, LoadOptions, SynthSpec, Task,
};
use semisup::harness::ExperimentData;
use serde_json::json;

use crate::config::{AuxSource, Config, OodSource, TaskSource};
use crate::error::CliError;

pub fn format_of(path: &Path) -> Result<DataFormat, CliError> {
    DataFormat::from_path(path).ok_or_else(|| {
        CliError::validation("validation", format!("cannot tell the format of {}; use .tsv or .jsonl", path.display()))
            .with_context(json!({ "path": path }))
    })
}

fn load(path: &Path, space: &LabelSpace, options: &LoadOptions) -> Result<Dataset, CliError> {
    if !path.exists() {
        return Err(CliError::validation("validation", format!("dataset {} does not exist", path.display()))
            .with_context(json!({ "path": path })));
    }
    Ok(load_dataset(path, format_of(path)?, space.clone(), options)?)
}

pub fn task(src: &TaskSource) -> Result<Task, CliError> {
    match (&src.train, &src.test) {
        (Some(train), Some(test)) => {
            let space = src.label_space.clone().ok_or_else(|| {
                CliError::validation("validation", "file-based tasks need datasets.task.label_space")
                    .with_context(json!({ "key": "datasets.task.label_space" }))
            })?;
            let options = LoadOptions {
                header: src.header,
                pair: src.pair,
            };
            let name = src.name.clone().unwrap_or_else(|| "task".into());
            let mut task = Task::new(
                name,
                load(train, &space, &options)?.with_id_prefix("train-"),
                load(test, &space, &options)?.with_id_prefix("test-"),
            )?;
            if let Some(dev) = &src.dev {
                task.dev = Some(load(dev, &space, &options)?.with_id_prefix("dev-"));
            }
            Ok(task)
        }
        (None, None) => {
            let spec = src.synth.as_ref().ok_or_else(|| {
                CliError::validation("validation", "datasets.task needs either synth or train/test paths")
            })?;
            let mut task = spec.task(src.train_size, src.test_size, src.seed)?;
            if let Some(name) = &src.name {
                task.name = name.clone();
            }
            Ok(task)
        }
        _ => Err(CliError::validation("validation", "datasets.task needs both train and test paths")),
    }
}

pub fn aux(src: &AuxSource) -> Result<(Dataset, Dataset), CliError> {
    match (&src.train, &src.dev) {
        (Some(train), Some(dev)) => {
            let classes = src.classes.clone().unwrap_or_else(|| {
                semisup::augmentation::NLI_LABELS.iter().map(|s| s.to_string()).collect()
            });
            let space = LabelSpace::categorical(classes)?;
            let options = LoadOptions { header: false, pair: true };
            Ok((load(train, &space, &options)?, load(dev, &space, &options)?.with_id_prefix("dev-")))
        }
        (None, None) => {
            let spec = src.synth.as_ref().ok_or_else(|| {
                CliError::validation("validation", "datasets.aux needs either synth or train/dev paths")
            })?;
            let train = synth_corpus(spec, src.train_size, src.seed)?;
            let dev = synth_corpus(spec, src.dev_size, semisup::seed::derive(src.seed, "aux-dev", 0))?;
            Ok((train, dev.with_id_prefix("dev-")))
        }
        _ => Err(CliError::validation("validation", "datasets.aux needs both train and dev paths")),
    }
}

pub fn ood(src: &OodSource, task: &Task) -> Result<Dataset, CliError> {
    let space = task.label_space();
    match (&src.path, &src.synth) {
        (Some(path), _) => load(path, space, &LoadOptions::default()),
        (None, Some(spec)) => {
            if &spec.label_space() != space {
                return Err(CliError::validation("type", "datasets.ood uses a different label space than the task"));
            }
            Ok(synth_corpus(spec, src.size, src.seed)?.with_id_prefix("ood-"))
        }
        (None, None) => Err(CliError::validation("validation", "datasets.ood needs synth or path")),
    }
}

/// Everything the experiment needs, loading auxiliary and out-of-domain
/// data only when some arm uses it.
pub fn experiment_data(config: &Config) -> Result<ExperimentData, CliError> {
    let spec = config.experiment_spec();
    let mut data = ExperimentData::new(task(&config.datasets.task)?);
    if spec.needs_augmentation() {
        data.aux = Some(aux(&config.datasets.aux.clone().unwrap_or_default())?);
    }
    if spec.needs_ood() {
        let src = config.datasets.ood.as_ref().ok_or_else(|| {
            CliError::validation("validation", "arms with an out-of-domain pool need datasets.ood")
                .with_context(json!({ "key": "datasets.ood" }))
        })?;
        data.ood = Some(ood(src, &data.task)?);
    }
    Ok(data)
}

pub fn synth_family(name: &str) -> Result<SynthSpec, CliError> {
    Ok(SynthSpec::from_name(name)?)
}
