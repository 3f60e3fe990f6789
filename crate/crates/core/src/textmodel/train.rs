//! Mini-batch SGD for the linear model.
//!
//! The objective is the mean cross-entropy (classification) or mean half
//! squared error (regression) plus `l2 / 2 · ‖W‖²`; the bias is not
//! regularized. Weight decay is applied lazily through a global scale so a
//! step only touches the features present in its batch.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::average::average_checkpoints;
use super::features::FeatureVector;
use super::metrics::{score_labels, Metric};
use super::params::{argmax, softmax, ModelParams};
use crate::corpus::{Dataset, Label, LabelSpace};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stopping {
    /// Evaluate on dev every `eval_every` steps and keep the best checkpoint;
    /// stop after `patience` evaluations without improvement.
    EarlyStop { patience: usize, eval_every: usize },
    /// Run exactly `total` steps, snapshot every `checkpoint_every` steps and
    /// return the mean of the last `average_last` snapshots.
    FixedSteps {
        total: usize,
        checkpoint_every: usize,
        average_last: usize,
    },
}

impl Stopping {
    /// 512 steps, a checkpoint every 30, averaging the last 5.
    pub fn dev_free() -> Stopping {
        Stopping::FixedSteps {
            total: 512,
            checkpoint_every: 30,
            average_last: 5,
        }
    }

    pub fn needs_dev(&self) -> bool {
        matches!(self, Stopping::EarlyStop { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// `lr / (1 + decay · step)`.
    InverseTime { decay: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Step limit under early stopping; ignored by fixed-step training.
    pub max_steps: usize,
    pub l2: f64,
    pub seed: u64,
    pub stopping: Stopping,
    pub lr_schedule: LrSchedule,
    /// Dev metric for early stopping; defaults to the label space's metric.
    pub metric: Option<Metric>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            batch_size: 32,
            max_steps: 500,
            l2: 1e-4,
            seed: 0,
            stopping: Stopping::EarlyStop {
                patience: 5,
                eval_every: 25,
            },
            lr_schedule: LrSchedule::Constant,
            metric: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return bad("l2 must be finite and non-negative");
        }
        if self.learning_rate * self.l2 >= 1.0 {
            return bad("learning_rate · l2 must be below 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if let LrSchedule::InverseTime { decay } = self.lr_schedule {
            if !(decay.is_finite() && decay >= 0.0) {
                return bad("lr decay must be finite and non-negative");
            }
        }
        match self.stopping {
            Stopping::EarlyStop { patience, eval_every } => {
                if self.max_steps == 0 || patience == 0 || eval_every == 0 {
                    return bad("max_steps, patience and eval_every must be positive");
                }
            }
            Stopping::FixedSteps {
                total,
                checkpoint_every,
                average_last,
            } => {
                if total == 0 || checkpoint_every == 0 || average_last == 0 {
                    return bad("total, checkpoint_every and average_last must be positive");
                }
                if average_last > total / checkpoint_every {
                    return Err(Error::Config(format!(
                        "average_last {average_last} exceeds the {} checkpoints taken",
                        total / checkpoint_every
                    )));
                }
            }
        }
        Ok(())
    }

    fn lr_at(&self, step: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::InverseTime { decay } => self.learning_rate / (1.0 + decay * step as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: usize,
    /// Mean batch loss (data term only) since the previous entry.
    pub train_loss: f64,
    pub dev_metric: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub entries: Vec<TraceEntry>,
    pub steps_run: usize,
    /// Step of the returned checkpoint under early stopping.
    pub best_step: Option<usize>,
    /// Steps at which fixed-step snapshots were taken.
    pub checkpoint_steps: Vec<usize>,
    /// The snapshots that were averaged (fixed-step training only).
    #[serde(skip)]
    pub averaged: Vec<ModelParams>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub params: ModelParams,
    pub trace: TrainTrace,
}

/// Featurized, labeled examples.
pub struct Batch {
    pub x: Vec<FeatureVector>,
    pub y: Vec<Label>,
}

impl Batch {
    pub fn from_dataset(params: &ModelParams, dataset: &Dataset) -> Result<Batch> {
        if dataset.label_space != params.label_space {
            return Err(Error::Type(format!(
                "`{}` label space does not match the model",
                dataset.name
            )));
        }
        let y = dataset
            .examples
            .iter()
            .map(|e| {
                e.label
                    .ok_or_else(|| Error::Validation(format!("example `{}` is unlabeled", e.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        let x = dataset.examples.iter().map(|e| params.featurize(e)).collect();
        Ok(Batch { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Per-example data loss and its gradient with respect to the logits.
fn loss_and_dlogits(space: &LabelSpace, logits: &[f64], label: &Label) -> (f64, Vec<f64>) {
    match (space, label) {
        (LabelSpace::Categorical { .. }, Label::Class(y)) => {
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            let mut g = softmax(logits);
            g[*y] -= 1.0;
            (lse - logits[*y], g)
        }
        (LabelSpace::Continuous { .. }, Label::Value(v)) => {
            let r = logits[0] - v;
            (0.5 * r * r, vec![r])
        }
        _ => unreachable!("labels are checked against the label space"),
    }
}

/// Full objective on `batch`: mean data loss plus the L2 term.
pub fn objective(params: &ModelParams, batch: &Batch, l2: f64) -> f64 {
    let data: f64 = batch
        .x
        .iter()
        .zip(&batch.y)
        .map(|(x, y)| loss_and_dlogits(&params.label_space, &params.logits(x), y).0)
        .sum::<f64>()
        / batch.len() as f64;
    let norm: f64 = params.weights.iter().map(|w| w * w).sum();
    data + 0.5 * l2 * norm
}

/// Dense gradient of [`objective`] as `(d weights, d bias)`.
pub fn gradient(params: &ModelParams, batch: &Batch, l2: f64) -> (Vec<f64>, Vec<f64>) {
    let d = params.hash_dim();
    let n = batch.len() as f64;
    let mut gw: Vec<f64> = params.weights.iter().map(|w| l2 * w).collect();
    let mut gb = vec![0.0; params.num_outputs()];
    for (x, y) in batch.x.iter().zip(&batch.y) {
        let (_, g) = loss_and_dlogits(&params.label_space, &params.logits(x), y);
        for (k, gk) in g.iter().enumerate() {
            gb[k] += gk / n;
            for &(j, c) in &x.entries {
                gw[k * d + j as usize] += gk * c / n;
            }
        }
    }
    (gw, gb)
}

/// Working copy of the parameters: `W = scale · v`.
struct SgdState {
    v: Vec<f64>,
    scale: f64,
    bias: Vec<f64>,
    dim: usize,
}

impl SgdState {
    fn new(init: &ModelParams) -> SgdState {
        SgdState {
            v: init.weights.clone(),
            scale: 1.0,
            bias: init.bias.clone(),
            dim: init.hash_dim(),
        }
    }

    fn logits(&self, x: &FeatureVector) -> Vec<f64> {
        self.bias
            .iter()
            .enumerate()
            .map(|(k, b)| self.scale * x.dot(&self.v[k * self.dim..(k + 1) * self.dim]) + b)
            .collect()
    }

    fn materialize(&self, template: &ModelParams) -> ModelParams {
        ModelParams {
            weights: self.v.iter().map(|w| self.scale * w).collect(),
            bias: self.bias.clone(),
            ..template.clone()
        }
    }

    fn predict_label(&self, space: &LabelSpace, x: &FeatureVector) -> Label {
        let z = self.logits(x);
        match space {
            LabelSpace::Categorical { .. } => Label::Class(argmax(&z)),
            LabelSpace::Continuous { lo, hi } => Label::Value(z[0].clamp(*lo, *hi)),
        }
    }
}

struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
    size: usize,
    rng: seed::Rng,
}

impl BatchSampler {
    fn new(n: usize, batch_size: usize, seed: u64) -> BatchSampler {
        let mut s = BatchSampler {
            order: (0..n).collect(),
            cursor: 0,
            size: batch_size.min(n),
            rng: seed::rng(seed),
        };
        if s.size < n {
            s.order.shuffle(&mut s.rng);
        }
        s
    }

    fn next(&mut self) -> Vec<usize> {
        if self.size == self.order.len() {
            return self.order.clone();
        }
        let mut out = Vec::with_capacity(self.size);
        while out.len() < self.size {
            if self.cursor == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

fn dev_score(state: &SgdState, space: &LabelSpace, dev: &Batch, metric: &Metric) -> f64 {
    let predicted: Vec<Label> = dev.x.iter().map(|x| state.predict_label(space, x)).collect();
    score_labels(&predicted, &dev.y, metric, space).unwrap_or(f64::NEG_INFINITY)
}

/// Train from `init` on `train_set`.
pub fn train(
    init: &ModelParams,
    train_set: &Dataset,
    config: &TrainConfig,
    dev_set: Option<&Dataset>,
) -> Result<Trained> {
    config.validate()?;
    init.validate()?;
    if config.stopping.needs_dev() && dev_set.is_none_or(Dataset::is_empty) {
        return Err(Error::Config("early stopping requires a nonempty dev set".into()));
    }
    if train_set.is_empty() {
        return Err(Error::Config(format!("training set `{}` is empty", train_set.name)));
    }
    let data = Batch::from_dataset(init, train_set)?;
    let dev = dev_set
        .filter(|d| !d.is_empty())
        .map(|d| Batch::from_dataset(init, d))
        .transpose()?;
    let metric = config
        .metric
        .clone()
        .unwrap_or_else(|| Metric::default_for(&init.label_space));
    metric.check_compatible(&init.label_space)?;

    let space = &init.label_space;
    let mut state = SgdState::new(init);
    let mut sampler = BatchSampler::new(data.len(), config.batch_size, config.seed);
    let mut trace = TrainTrace::default();
    let mut loss_acc = 0.0;
    let mut loss_steps = 0usize;

    let (total_steps, eval_every) = match config.stopping {
        Stopping::EarlyStop { eval_every, .. } => (config.max_steps, eval_every),
        Stopping::FixedSteps {
            total,
            checkpoint_every,
            ..
        } => (total, checkpoint_every),
    };

    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut stale_evals = 0usize;
    let mut retained: VecDeque<ModelParams> = VecDeque::new();

    for step in 1..=total_steps {
        let lr = config.lr_at(step - 1);
        let idx = sampler.next();
        let b = idx.len() as f64;

        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(idx.len());
        let mut batch_loss = 0.0;
        for &i in &idx {
            let (loss, g) = loss_and_dlogits(space, &state.logits(&data.x[i]), &data.y[i]);
            batch_loss += loss;
            grads.push(g);
        }
        batch_loss /= b;
        if !batch_loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite training loss at step {step}")));
        }
        loss_acc += batch_loss;
        loss_steps += 1;

        state.scale *= 1.0 - lr * config.l2;
        if state.scale < 1e-6 {
            let s = state.scale;
            state.v.iter_mut().for_each(|w| *w *= s);
            state.scale = 1.0;
        }
        let d = state.dim;
        for (&i, g) in idx.iter().zip(&grads) {
            for (k, gk) in g.iter().enumerate() {
                let coef = lr * gk / b / state.scale;
                let row = &mut state.v[k * d..(k + 1) * d];
                for &(j, c) in &data.x[i].entries {
                    row[j as usize] -= coef * c;
                }
            }
        }
        for k in 0..state.bias.len() {
            let g: f64 = grads.iter().map(|g| g[k]).sum::<f64>() / b;
            state.bias[k] -= lr * g;
        }
        trace.steps_run = step;

        let at_eval = step % eval_every == 0;
        match config.stopping {
            Stopping::EarlyStop { patience, .. } => {
                if !at_eval && step != total_steps {
                    continue;
                }
                let score = dev_score(&state, space, dev.as_ref().expect("checked"), &metric);
                trace.entries.push(TraceEntry {
                    step,
                    train_loss: loss_acc / loss_steps as f64,
                    dev_metric: Some(score),
                });
                loss_acc = 0.0;
                loss_steps = 0;
                let improved = match &best {
                    None => true,
                    Some((s, _, _)) => score > *s,
                };
                if improved {
                    best = Some((score, step, state.materialize(init)));
                    stale_evals = 0;
                } else {
                    stale_evals += 1;
                    if stale_evals >= patience {
                        break;
                    }
                }
            }
            Stopping::FixedSteps { average_last, .. } => {
                if !at_eval {
                    continue;
                }
                trace.entries.push(TraceEntry {
                    step,
                    train_loss: loss_acc / loss_steps as f64,
                    dev_metric: dev.as_ref().map(|d| dev_score(&state, space, d, &metric)),
                });
                loss_acc = 0.0;
                loss_steps = 0;
                trace.checkpoint_steps.push(step);
                retained.push_back(state.materialize(init));
                if retained.len() > average_last {
                    retained.pop_front();
                }
            }
        }
    }

    let params = match config.stopping {
        Stopping::EarlyStop { .. } => {
            let (_, step, params) = best.expect("at least one evaluation runs");
            trace.best_step = Some(step);
            params
        }
        Stopping::FixedSteps { .. } => {
            let snapshots: Vec<ModelParams> = retained.into_iter().collect();
            let avg = average_checkpoints(&snapshots)?;
            trace.averaged = snapshots;
            avg
        }
    };
    params.validate()?;
    Ok(Trained { params, trace })
}
