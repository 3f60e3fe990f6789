//! Examples, datasets, file formats and data-regime sampling.

mod io;
pub mod lexicon;
mod regime;
mod synth;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use io::{load_dataset, save_dataset, DataFormat, LoadOptions};
pub use regime::{
    bin_continuous_labels, bin_of, sample_regime, strip_labels, Regime, RegimeOptions,
    RegimeSplit, Task,
};
pub use synth::{
    synth_corpus, DriftedClusterParams, KeywordScoreParams, KeywordSentimentParams, NliDomain,
    PairNliParams, SynthSpec,
};

/// A gold or pseudo label. Categorical labels are indices into the owning
/// [`LabelSpace`]'s class list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Class(usize),
    Value(f64),
}

impl Label {
    pub fn class(&self) -> Option<usize> {
        match *self {
            Label::Class(c) => Some(c),
            Label::Value(_) => None,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Label::Value(v) => Some(v),
            Label::Class(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelSpace {
    Categorical { classes: Vec<String> },
    Continuous { lo: f64, hi: f64 },
}

impl LabelSpace {
    pub fn categorical<S: Into<String>>(classes: impl IntoIterator<Item = S>) -> Result<Self> {
        let space = LabelSpace::Categorical {
            classes: classes.into_iter().map(Into::into).collect(),
        };
        space.validate()?;
        Ok(space)
    }

    pub fn continuous(lo: f64, hi: f64) -> Result<Self> {
        let space = LabelSpace::Continuous { lo, hi };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LabelSpace::Categorical { classes } => {
                if classes.len() < 2 {
                    return Err(Error::Validation(
                        "categorical label space needs at least 2 classes".into(),
                    ));
                }
                let unique: HashSet<&String> = classes.iter().collect();
                if unique.len() != classes.len() {
                    return Err(Error::Validation(format!(
                        "duplicate class names in {classes:?}"
                    )));
                }
                Ok(())
            }
            LabelSpace::Continuous { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::Validation(format!(
                        "continuous label space needs finite lo < hi, got [{lo}, {hi}]"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, LabelSpace::Categorical { .. })
    }

    /// Number of model outputs: classes for categorical, 1 for continuous.
    pub fn num_outputs(&self) -> usize {
        match self {
            LabelSpace::Categorical { classes } => classes.len(),
            LabelSpace::Continuous { .. } => 1,
        }
    }

    pub fn classes(&self) -> &[String] {
        match self {
            LabelSpace::Categorical { classes } => classes,
            LabelSpace::Continuous { .. } => &[],
        }
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes().iter().position(|c| c == name)
    }

    pub fn class_name(&self, index: usize) -> Option<&str> {
        self.classes().get(index).map(String::as_str)
    }

    /// Check that `label` belongs to this space.
    pub fn check(&self, label: &Label) -> Result<()> {
        match (self, label) {
            (LabelSpace::Categorical { classes }, Label::Class(c)) => {
                if *c < classes.len() {
                    Ok(())
                } else {
                    Err(Error::Validation(format!(
                        "class index {c} outside {} classes",
                        classes.len()
                    )))
                }
            }
            (LabelSpace::Continuous { lo, hi }, Label::Value(v)) => {
                if v.is_finite() && *v >= *lo && *v <= *hi {
                    Ok(())
                } else {
                    Err(Error::Validation(format!(
                        "label {v} outside interval [{lo}, {hi}]"
                    )))
                }
            }
            (LabelSpace::Categorical { .. }, Label::Value(v)) => Err(Error::Validation(format!(
                "continuous label {v} in a categorical label space"
            ))),
            (LabelSpace::Continuous { .. }, Label::Class(c)) => Err(Error::Validation(format!(
                "class label {c} in a continuous label space"
            ))),
        }
    }

    /// Parse a label from its textual form (class name or number).
    pub fn parse_label(&self, raw: &str) -> Result<Label> {
        let raw = raw.trim();
        let label = match self {
            LabelSpace::Categorical { classes } => {
                let idx = self.class_index(raw).ok_or_else(|| {
                    Error::Validation(format!("label `{raw}` not in class set {classes:?}"))
                })?;
                Label::Class(idx)
            }
            LabelSpace::Continuous { .. } => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| Error::Validation(format!("label `{raw}` is not a number")))?;
                Label::Value(v)
            }
        };
        self.check(&label)?;
        Ok(label)
    }

    /// Textual form of a label, the inverse of [`LabelSpace::parse_label`].
    pub fn format_label(&self, label: &Label) -> String {
        match label {
            Label::Class(c) => self
                .class_name(*c)
                .map(str::to_owned)
                .unwrap_or_else(|| c.to_string()),
            Label::Value(v) => v.to_string(),
        }
    }
}

/// One text instance: a single segment or a segment pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub segment_a: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_b: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

impl Example {
    pub fn single(id: impl Into<String>, text: impl Into<String>, label: Option<Label>) -> Self {
        Example {
            id: id.into(),
            segment_a: text.into(),
            segment_b: None,
            label,
        }
    }

    pub fn pair(
        id: impl Into<String>,
        a: impl Into<String>,
        b: impl Into<String>,
        label: Option<Label>,
    ) -> Self {
        Example {
            id: id.into(),
            segment_a: a.into(),
            segment_b: Some(b.into()),
            label,
        }
    }

    pub fn unlabeled(&self) -> Example {
        Example {
            label: None,
            ..self.clone()
        }
    }

    pub fn with_label(&self, label: Label) -> Example {
        Example {
            label: Some(label),
            ..self.clone()
        }
    }
}

fn check_examples<'a>(examples: impl IntoIterator<Item = &'a Example>) -> Result<()> {
    let mut seen = HashSet::new();
    for ex in examples {
        if ex.segment_a.trim().is_empty() {
            return Err(Error::Validation(format!(
                "example `{}` has an empty segment_a",
                ex.id
            )));
        }
        if !seen.insert(ex.id.as_str()) {
            return Err(Error::Validation(format!("duplicate example id `{}`", ex.id)));
        }
    }
    Ok(())
}

/// Gold labels keyed by example id.
pub type GoldLabels = BTreeMap<String, Label>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub label_space: LabelSpace,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        label_space: LabelSpace,
        examples: Vec<Example>,
    ) -> Result<Self> {
        let ds = Dataset {
            name: name.into(),
            label_space,
            examples,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn empty(name: impl Into<String>, label_space: LabelSpace) -> Self {
        Dataset {
            name: name.into(),
            label_space,
            examples: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.label_space.validate()?;
        check_examples(&self.examples)?;
        for ex in &self.examples {
            if let Some(label) = &ex.label {
                self.label_space
                    .check(label)
                    .map_err(|e| Error::Validation(format!("example `{}`: {e}", ex.id)))?;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.examples.iter().all(|e| e.label.is_some())
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.examples.iter().map(|e| e.id.as_str())
    }

    pub fn gold_labels(&self) -> GoldLabels {
        self.examples
            .iter()
            .filter_map(|e| e.label.map(|l| (e.id.clone(), l)))
            .collect()
    }

    /// Copy with every id prefixed, used to keep partitions disjoint by id.
    pub fn with_id_prefix(&self, prefix: &str) -> Dataset {
        Dataset {
            name: self.name.clone(),
            label_space: self.label_space.clone(),
            examples: self
                .examples
                .iter()
                .map(|e| Example {
                    id: format!("{prefix}{}", e.id),
                    ..e.clone()
                })
                .collect(),
        }
    }

    /// Examples at the given indices, in the given order.
    pub fn select(&self, name: impl Into<String>, indices: &[usize]) -> Dataset {
        Dataset {
            name: name.into(),
            label_space: self.label_space.clone(),
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }

    /// Concatenate two datasets over the same label space.
    pub fn concat(&self, other: &Dataset, name: impl Into<String>) -> Result<Dataset> {
        if self.label_space != other.label_space {
            return Err(Error::Type(format!(
                "cannot concatenate `{}` and `{}`: label spaces differ",
                self.name, other.name
            )));
        }
        let mut examples = self.examples.clone();
        examples.extend(other.examples.iter().cloned());
        Dataset::new(name, self.label_space.clone(), examples)
    }
}

/// Unlabeled examples; never carries labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlabeledPool {
    pub source_name: String,
    pub examples: Vec<Example>,
}

impl UnlabeledPool {
    pub fn new(source_name: impl Into<String>, examples: Vec<Example>) -> Result<Self> {
        let pool = UnlabeledPool {
            source_name: source_name.into(),
            examples,
        };
        check_examples(&pool.examples)?;
        if let Some(ex) = pool.examples.iter().find(|e| e.label.is_some()) {
            return Err(Error::Validation(format!(
                "pool example `{}` carries a label",
                ex.id
            )));
        }
        Ok(pool)
    }

    pub fn empty(source_name: impl Into<String>) -> Self {
        UnlabeledPool {
            source_name: source_name.into(),
            examples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.examples.iter().map(|e| e.id.as_str())
    }

    /// Rejoin the pool with labels looked up by id.
    pub fn attach_labels(
        &self,
        name: impl Into<String>,
        label_space: LabelSpace,
        gold: &GoldLabels,
    ) -> Result<Dataset> {
        let examples = self
            .examples
            .iter()
            .map(|e| {
                gold.get(&e.id)
                    .map(|l| e.with_label(*l))
                    .ok_or_else(|| Error::Coverage(format!("no gold label for id `{}`", e.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(name, label_space, examples)
    }
}
