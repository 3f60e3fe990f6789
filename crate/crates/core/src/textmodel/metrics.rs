use serde::{Deserialize, Serialize};

use super::params::Predictor;
use crate::corpus::{Dataset, Label, LabelSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    /// F1 of the named positive class.
    F1 { positive: String },
    Spearman,
}

impl Metric {
    /// Accuracy for categorical spaces, Spearman for continuous ones.
    pub fn default_for(space: &LabelSpace) -> Metric {
        if space.is_categorical() {
            Metric::Accuracy
        } else {
            Metric::Spearman
        }
    }

    pub fn check_compatible(&self, space: &LabelSpace) -> Result<()> {
        match (self, space) {
            (Metric::Accuracy, LabelSpace::Categorical { .. }) => Ok(()),
            (Metric::F1 { positive }, LabelSpace::Categorical { .. }) => {
                space.class_index(positive).map(|_| ()).ok_or_else(|| {
                    Error::Config(format!("f1 positive class `{positive}` not in label space"))
                })
            }
            (Metric::Spearman, LabelSpace::Continuous { .. }) => Ok(()),
            (m, _) => Err(Error::Type(format!(
                "metric {m:?} does not apply to a {} label space",
                if space.is_categorical() { "categorical" } else { "continuous" }
            ))),
        }
    }
}

fn classes(labels: &[Label]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| l.class().ok_or_else(|| Error::Type("expected class labels".into())))
        .collect()
}

fn values(labels: &[Label]) -> Result<Vec<f64>> {
    labels
        .iter()
        .map(|l| l.value().ok_or_else(|| Error::Type("expected continuous labels".into())))
        .collect()
}

pub fn accuracy(predicted: &[usize], gold: &[usize]) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::UndefinedMetric("accuracy of an empty set".into()));
    }
    let hits = predicted.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// F1 for `positive`; zero when the class is never predicted and never gold
/// is treated as undefined.
pub fn f1(predicted: &[usize], gold: &[usize], positive: usize) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::UndefinedMetric("f1 of an empty set".into()));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fneg = 0usize;
    for (&p, &g) in predicted.iter().zip(gold) {
        match (p == positive, g == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    if tp + fp + fneg == 0 {
        return Err(Error::UndefinedMetric(
            "f1 with no positive predictions or gold labels".into(),
        ));
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fneg) as f64)
}

/// Ranks starting at 1; tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

pub fn spearman(predicted: &[f64], gold: &[f64]) -> Result<f64> {
    if gold.len() < 2 {
        return Err(Error::UndefinedMetric("spearman needs at least 2 points".into()));
    }
    pearson(&average_ranks(predicted), &average_ranks(gold))
        .ok_or_else(|| Error::UndefinedMetric("spearman of a constant ranking".into()))
}

/// Score predicted labels against gold labels.
pub fn score_labels(predicted: &[Label], gold: &[Label], metric: &Metric, space: &LabelSpace) -> Result<f64> {
    metric.check_compatible(space)?;
    if gold.is_empty() {
        return Err(Error::UndefinedMetric("metric of an empty set".into()));
    }
    match metric {
        Metric::Accuracy => accuracy(&classes(predicted)?, &classes(gold)?),
        Metric::F1 { positive } => {
            let pos = space.class_index(positive).expect("checked");
            f1(&classes(predicted)?, &classes(gold)?, pos)
        }
        Metric::Spearman => spearman(&values(predicted)?, &values(gold)?),
    }
}

/// Score a model on a labeled dataset.
pub fn evaluate<P: Predictor + ?Sized>(model: &P, dataset: &Dataset, metric: &Metric) -> Result<f64> {
    metric.check_compatible(model.label_space())?;
    if dataset.is_empty() {
        return Err(Error::UndefinedMetric(format!("`{}` is empty", dataset.name)));
    }
    let gold = dataset
        .examples
        .iter()
        .map(|e| {
            e.label
                .ok_or_else(|| Error::Validation(format!("example `{}` is unlabeled", e.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let predicted: Vec<Label> = dataset.examples.iter().map(|e| model.predict(e).label()).collect();
    score_labels(&predicted, &gold, metric, model.label_space())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let gold = [0, 1, 1, 0];
        assert_eq!(accuracy(&gold, &gold).unwrap(), 1.0);
        assert_eq!(f1(&gold, &gold, 1).unwrap(), 1.0);
    }

    #[test]
    fn constant_predictions_on_balanced_set() {
        assert_eq!(accuracy(&[0, 0, 0, 0], &[0, 1, 0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn f1_by_hand() {
        // tp = 1, fp = 1, fn = 1 -> 2/(2+1+1)
        assert!((f1(&[1, 1, 0, 0], &[1, 0, 1, 0], 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reversed_ranks() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&a, &b).unwrap() + 1.0).abs() < 1e-12);
        assert!((spearman(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_share_average_rank() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn empty_and_mismatched() {
        assert!(matches!(accuracy(&[], &[]), Err(Error::UndefinedMetric(_))));
        let cont = LabelSpace::continuous(0.0, 5.0).unwrap();
        let f1m = Metric::F1 { positive: "pos".into() };
        assert!(matches!(f1m.check_compatible(&cont), Err(Error::Type(_))));
        assert!(matches!(spearman(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::UndefinedMetric(_))));
    }
}
