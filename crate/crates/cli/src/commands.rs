use std::path::{Path, PathBuf};

use semisup::augmentation::{run_task_augmentation, Generator};
use semisup::corpus::{sample_regime, save_dataset, strip_labels, DataFormat, LoadOptions, UnlabeledPool};
use semisup::harness::{restart_seed, run_experiment, sweep_k, DevMode, RunReport, Timing};
use semisup::selftrain::{mix_gold, mix_pools, self_train, PoolMix, SelfTrainData, SelfTrainMode};
use semisup::textmodel::{init_params, Metric, ModelParams, TrainConfig};
use semisup::seed;
use serde_json::json;

use crate::config::Config;
use crate::data;
use crate::error::{CliError, EXIT_OK, EXIT_PARTIAL};
use crate::output::{aggregate_csv, scores_csv, Artifacts, TIMING};

/// Shared command context.
pub struct Run {
    pub config: Config,
    pub out: PathBuf,
    pub quiet: bool,
    pub validate_only: bool,
}

impl Run {
    fn say(&self, line: &str) {
        if !self.quiet {
            println!("{line}");
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

pub fn augment(run: &Run) -> Result<i32, CliError> {
    let config = &run.config;
    let spec = config.experiment_spec();
    let task = data::task(&config.datasets.task)?;
    let (aux_train, aux_dev) = data::aux(&config.datasets.aux.clone().unwrap_or_default())?;
    let sentences = match &config.datasets.unlabeled {
        Some(path) => {
            let ds = semisup::corpus::load_dataset(
                path,
                data::format_of(path)?,
                task.label_space().clone(),
                &LoadOptions::default(),
            )?;
            strip_labels(&ds)
        }
        None => strip_labels(&task.train),
    };
    spec.augmentation.validate()?;
    spec.generator.validate()?;
    spec.model.features.validate()?;
    spec.train.validate()?;
    if run.validate_only {
        run.say("config ok");
        return Ok(EXIT_OK);
    }

    let generator = Generator::new(spec.generator.clone())?;
    let cfg = TrainConfig {
        metric: None,
        ..spec.train.clone()
    };
    let ta = run_task_augmentation(
        &aux_train,
        &aux_dev,
        &sentences,
        &generator,
        &spec.model.features,
        task.label_space(),
        &spec.augmentation,
        &cfg,
        seed::derive(spec.master_seed, "augmentation", 0),
    )?;

    let mut out = Artifacts::create(&run.out)?;
    ta.synthetic.save_jsonl(&out.path("synthetic.jsonl"))?;
    out.record("synthetic.jsonl")?;
    out.write("f0.bin", &ta.f0.to_bytes())?;
    out.write_json(
        "augment.json",
        &json!({
            "tau": ta.selection.tau,
            "tau_evaluations": ta.selection.evaluations,
            "sentences": sentences.len(),
            "candidates_kept": ta.synthetic.len(),
            "aux_dev_score": ta.aux_dev_score,
            "aux_classifier_hash": ta.aux_classifier.content_hash(),
            "f0_hash": ta.f0.content_hash(),
        }),
    )?;
    out.finish()?;
    run.say(&format!(
        "augment: {} sentences, {} synthetic examples kept at tau {}, aux dev accuracy {:.4}",
        sentences.len(),
        ta.synthetic.len(),
        ta.selection.tau,
        ta.aux_dev_score
    ));
    Ok(EXIT_OK)
}

pub struct SelftrainArgs {
    pub f0: Option<PathBuf>,
    pub confidence_filter: bool,
    pub batch: Option<usize>,
    pub max_iterations: Option<usize>,
    pub pool: PoolMix,
    pub ood: Option<PathBuf>,
}

pub fn selftrain(run: &Run, args: &SelftrainArgs) -> Result<i32, CliError> {
    let config = &run.config;
    let spec = config.experiment_spec();
    let task = data::task(&config.datasets.task)?;
    let space = task.label_space();

    let mut st = spec.self_training.clone();
    if let Some(n) = args.max_iterations {
        st.max_iterations = n;
    }
    if args.confidence_filter {
        let batch = match (args.batch, st.mode) {
            (Some(b), _) => b,
            (None, SelfTrainMode::ConfidenceFiltering { batch }) => batch,
            (None, SelfTrainMode::Broad) => 32,
        };
        st.mode = SelfTrainMode::ConfidenceFiltering { batch };
    } else if args.batch.is_some() {
        return Err(CliError::validation("usage", "--batch only applies to --mode confidence-filter"));
    }
    st.validate()?;
    spec.train.validate()?;
    spec.model.features.validate()?;

    let rs = restart_seed(spec.master_seed, 0);
    let f0 = match &args.f0 {
        Some(path) => ModelParams::load(path).map_err(|e| {
            CliError::from(e).with_context(json!({ "path": path }))
        })?,
        None => init_params(space, &spec.model.features, seed::derive(rs, "init", 0), spec.model.init)?,
    };
    if &f0.label_space != space {
        return Err(CliError::validation(
            "type",
            "the f0 snapshot's head does not match the task's label space",
        )
        .with_context(json!({ "f0": f0.label_space, "task": space })));
    }
    let ood = match (&args.ood, args.pool) {
        (_, PoolMix::InOnly) => None,
        (Some(path), _) => Some(semisup::corpus::load_dataset(
            path,
            data::format_of(path)?,
            space.clone(),
            &LoadOptions::default(),
        )?),
        (None, _) => match &config.datasets.ood {
            Some(src) => Some(data::ood(src, &task)?),
            None => {
                return Err(CliError::validation("usage", "--pool out or in+out needs --ood or datasets.ood"))
            }
        },
    };
    if run.validate_only {
        run.say("config ok");
        return Ok(EXIT_OK);
    }

    let split = sample_regime(&task, spec.regime, rs, &spec.regime_options)?;
    let ood_pool = ood.as_ref().map(strip_labels).unwrap_or_else(|| UnlabeledPool::empty("ood"));
    let pool = mix_pools(&split.pool, &ood_pool, args.pool)?;
    let gold = mix_gold(
        &task.train.gold_labels(),
        &ood.as_ref().map(|d| d.gold_labels()).unwrap_or_default(),
        args.pool,
    );
    let metric = spec.metric.clone().unwrap_or_else(|| Metric::default_for(space));
    let cfg = TrainConfig {
        seed: seed::derive(rs, "train", 0),
        metric: Some(metric),
        ..spec.train.clone()
    };
    let dev = match spec.dev_mode {
        DevMode::WithDev => Some(&split.dev).filter(|d| !d.is_empty()),
        DevMode::DevFree => None,
    };
    let output = self_train(
        &f0,
        SelfTrainData {
            labeled: &split.train,
            pool: &pool,
            dev,
            test: Some(&split.test),
            pool_gold: Some(&gold),
        },
        &st,
        &cfg,
        rs,
    )?;

    let mut out = Artifacts::create(&run.out)?;
    let mut text = output.result.to_json()?;
    text.push('\n');
    out.write("result.json", text.as_bytes())?;
    out.write("final_model.bin", &output.final_model.to_bytes())?;
    out.finish()?;
    let r = &output.result;
    run.say(&format!(
        "selftrain: {} labeled, pool {}, {} iterations (converged at {}), test {}, pool labeling {}",
        r.labeled_size,
        r.pool_size,
        r.per_iteration.len(),
        r.converged_at.map(|c| c.to_string()).unwrap_or_else(|| "-".into()),
        fmt_opt(r.final_test),
        fmt_opt(r.final_pool_score),
    ));
    Ok(EXIT_OK)
}

pub fn experiment(run: &Run, sweep: &[usize], reference: bool) -> Result<i32, CliError> {
    let config = &run.config;
    let spec = config.experiment_spec();
    spec.validate()?;
    let data = data::experiment_data(config)?;
    data.check(&spec)?;
    let ks: Vec<usize> = if sweep.is_empty() { config.experiment.sweep.clone() } else { sweep.to_vec() };
    let reference = reference || config.experiment.reference;
    if !ks.is_empty() && (ks.windows(2).any(|w| w[0] >= w[1]) || ks[0] == 0) {
        return Err(CliError::validation("config", "sweep ks must be positive and strictly ascending"));
    }
    if run.validate_only {
        run.say("config ok");
        return Ok(EXIT_OK);
    }

    let mut out = Artifacts::create(&run.out)?;
    let (reports, timing): (Vec<(String, RunReport)>, Timing) = if ks.is_empty() {
        let (report, timing) = run_experiment(&spec, &data)?;
        out.write("scores.csv", &scores_csv(&report.score_rows())?)?;
        out.write("aggregate.csv", &aggregate_csv(&report.aggregate_rows())?)?;
        (vec![("report.json".into(), report)], timing)
    } else {
        let (curve, reports, timing) = sweep_k(&spec, &data, &ks, reference)?;
        out.write_json("curve.json", &curve)?;
        out.write("curve.csv", &scores_csv(&curve.rows)?)?;
        let mut aggregates = curve.aggregates.clone();
        aggregates.extend(curve.reference.iter().cloned());
        out.write("aggregate.csv", &aggregate_csv(&aggregates)?)?;
        let named = reports
            .into_iter()
            .map(|r| {
                let name = match r.k {
                    Some(k) => format!("report_k{k}.json"),
                    None => "report_full.json".into(),
                };
                (name, r)
            })
            .collect();
        (named, timing)
    };
    let mut partial = false;
    for (name, report) in &reports {
        let mut text = report.to_json()?;
        text.push('\n');
        out.write(name, text.as_bytes())?;
        partial |= report.partial;
        for arm in &report.arms {
            let k = report.k.map(|k| format!(" k={k}")).unwrap_or_default();
            run.say(&format!(
                "{}{k}: mean {} std {} ({} of {} restarts ok)",
                arm.name,
                fmt_opt(arm.mean),
                fmt_opt(arm.std),
                arm.successful_scores().len(),
                arm.scores.len()
            ));
            for e in &arm.errors {
                log::warn!("arm `{}` restart {}: [{}] {}", arm.name, e.restart, e.code, e.message);
            }
        }
    }
    let mut text = serde_json::to_string_pretty(&timing)?;
    text.push('\n');
    out.write_volatile(TIMING, text.as_bytes())?;
    out.finish()?;
    if partial {
        eprintln!(
            "{}",
            CliError::runtime("partial", "some arms failed on some restarts; see the report")
                .with_context(json!({ "out": run.out }))
                .to_json()
        );
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}

pub struct SynthArgs {
    pub family: Option<String>,
    pub train_size: Option<usize>,
    pub test_size: Option<usize>,
    pub format: DataFormat,
}

/// Write the configured task (or a named family) as train/test files.
pub fn synth(run: &Run, args: &SynthArgs) -> Result<i32, CliError> {
    let mut src = run.config.datasets.task.clone();
    if src.train.is_some() || src.test.is_some() {
        if args.family.is_none() {
            return Err(CliError::validation("usage", "the configured task is file-based; pass --family"));
        }
        src.train = None;
        src.test = None;
        src.dev = None;
    }
    if let Some(f) = &args.family {
        src.synth = Some(data::synth_family(f)?);
    }
    if let Some(n) = args.train_size {
        src.train_size = n;
    }
    if let Some(n) = args.test_size {
        src.test_size = n;
    }
    let task = data::task(&src)?;
    if run.validate_only {
        run.say("config ok");
        return Ok(EXIT_OK);
    }
    let ext = match args.format {
        DataFormat::Tsv => "tsv",
        DataFormat::Jsonl => "jsonl",
    };
    let mut out = Artifacts::create(&run.out)?;
    for (name, ds) in [("train", &task.train), ("test", &task.test)] {
        let file = format!("{name}.{ext}");
        save_dataset(ds, &out.path(&file), args.format)?;
        out.record(&file)?;
    }
    out.write_json("label_space.json", task.label_space())?;
    out.finish()?;
    run.say(&format!(
        "synth: {} train and {} test examples of {} in {}",
        task.train.len(),
        task.test.len(),
        task.name,
        run.out.display()
    ));
    Ok(EXIT_OK)
}

/// Resolve the config and every dataset it names.
pub fn validate(run: &Run, print: bool) -> Result<i32, CliError> {
    let spec = run.config.experiment_spec();
    spec.validate()?;
    let data = data::experiment_data(&run.config)?;
    data.check(&spec)?;
    if print {
        println!("{}", run.config.to_toml()?);
    } else {
        run.say(&format!(
            "config ok: task {} ({} train, {} test), {} arms x {} restarts",
            data.task.name,
            data.task.train.len(),
            data.task.test.len(),
            spec.arms.len(),
            spec.restarts
        ));
    }
    Ok(EXIT_OK)
}

pub fn default_out(command: &str) -> PathBuf {
    Path::new("semisup-out").join(command)
}
