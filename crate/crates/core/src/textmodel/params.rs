use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::features::{featurize, FeatureConfig, FeatureVector, PairMode};
use crate::corpus::{Example, Label, LabelSpace};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Classification,
    Regression,
}

impl Head {
    pub fn for_space(space: &LabelSpace) -> Head {
        if space.is_categorical() {
            Head::Classification
        } else {
            Head::Regression
        }
    }
}

/// Parameters of the linear model over hashed features.
///
/// `weights` is row-major `[num_outputs × hash_dim]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub head: Head,
    pub label_space: LabelSpace,
    pub features: FeatureConfig,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Class {
        probabilities: Vec<f64>,
        label: usize,
        confidence: f64,
    },
    Value(f64),
}

impl Prediction {
    pub fn label(&self) -> Label {
        match self {
            Prediction::Class { label, .. } => Label::Class(*label),
            Prediction::Value(v) => Label::Value(*v),
        }
    }

    pub fn confidence(&self) -> Option<f64> {
        match self {
            Prediction::Class { confidence, .. } => Some(*confidence),
            Prediction::Value(_) => None,
        }
    }
}

/// Anything that can label examples. Implemented by [`ModelParams`]; other
/// stand-in models plug into evaluation, annotation and filtering through it.
pub trait Predictor: Sync {
    fn label_space(&self) -> &LabelSpace;
    fn predict(&self, example: &Example) -> Prediction;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    Zeros,
    /// I.i.d. uniform in `[-scale, scale]`.
    Random { scale: f64 },
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Fresh parameters for a label space.
pub fn init_params(
    label_space: &LabelSpace,
    features: &FeatureConfig,
    seed: u64,
    scheme: InitScheme,
) -> Result<ModelParams> {
    label_space.validate()?;
    features.validate()?;
    let outputs = label_space.num_outputs();
    let size = outputs * features.hash_dim;
    let (weights, bias) = match scheme {
        InitScheme::Zeros => (vec![0.0; size], vec![0.0; outputs]),
        InitScheme::Random { scale } => {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Error::Config(format!("init scale must be positive, got {scale}")));
            }
            let mut rng = seed::rng(seed);
            let mut draw = || rng.gen_range(-scale..=scale);
            let w: Vec<f64> = (0..size).map(|_| draw()).collect();
            let b: Vec<f64> = (0..outputs).map(|_| draw()).collect();
            (w, b)
        }
    };
    Ok(ModelParams {
        head: Head::for_space(label_space),
        label_space: label_space.clone(),
        features: features.clone(),
        weights,
        bias,
    })
}

impl ModelParams {
    pub fn num_outputs(&self) -> usize {
        self.bias.len()
    }

    pub fn hash_dim(&self) -> usize {
        self.features.hash_dim
    }

    pub fn row(&self, output: usize) -> &[f64] {
        let d = self.hash_dim();
        &self.weights[output * d..(output + 1) * d]
    }

    pub fn validate(&self) -> Result<()> {
        let outputs = self.label_space.num_outputs();
        if self.head != Head::for_space(&self.label_space) {
            return Err(Error::Type("head does not match label space".into()));
        }
        if self.bias.len() != outputs || self.weights.len() != outputs * self.hash_dim() {
            return Err(Error::Type(format!(
                "parameter shapes do not match {outputs} outputs × {} features",
                self.hash_dim()
            )));
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.head == other.head
            && self.label_space == other.label_space
            && self.features == other.features
            && self.weights.len() == other.weights.len()
            && self.bias.len() == other.bias.len()
    }

    pub fn logits(&self, x: &FeatureVector) -> Vec<f64> {
        (0..self.num_outputs())
            .map(|k| x.dot(self.row(k)) + self.bias[k])
            .collect()
    }

    pub fn predict_features(&self, x: &FeatureVector) -> Prediction {
        let logits = self.logits(x);
        match &self.label_space {
            LabelSpace::Categorical { .. } => {
                let probabilities = softmax(&logits);
                let label = argmax(&probabilities);
                let confidence = probabilities[label];
                Prediction::Class {
                    probabilities,
                    label,
                    confidence,
                }
            }
            LabelSpace::Continuous { lo, hi } => Prediction::Value(logits[0].clamp(*lo, *hi)),
        }
    }

    pub fn featurize(&self, example: &Example) -> FeatureVector {
        featurize(example, &self.features)
    }

    /// Versioned little-endian binary snapshot; round-trips bit-exactly.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * (self.weights.len() + self.bias.len()));
        out.extend_from_slice(SNAPSHOT_MAGIC);
        put_u32(&mut out, SNAPSHOT_VERSION);
        out.push(match self.head {
            Head::Classification => 0,
            Head::Regression => 1,
        });
        match &self.label_space {
            LabelSpace::Categorical { classes } => {
                out.push(0);
                put_u32(&mut out, classes.len() as u32);
                for c in classes {
                    put_u32(&mut out, c.len() as u32);
                    out.extend_from_slice(c.as_bytes());
                }
            }
            LabelSpace::Continuous { lo, hi } => {
                out.push(1);
                put_f64(&mut out, *lo);
                put_f64(&mut out, *hi);
            }
        }
        put_u32(&mut out, self.features.ngram_orders.len() as u32);
        for o in &self.features.ngram_orders {
            put_u32(&mut out, *o as u32);
        }
        put_u64(&mut out, self.features.hash_dim as u64);
        out.push(match self.features.pair_mode {
            PairMode::Concat => 0,
            PairMode::ConcatNovelty => 1,
        });
        put_u64(&mut out, self.bias.len() as u64);
        put_u64(&mut out, self.weights.len() as u64);
        for v in self.bias.iter().chain(&self.weights) {
            put_f64(&mut out, *v);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ModelParams> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot("not a model snapshot (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported snapshot version {version}")));
        }
        let head = match r.u8()? {
            0 => Head::Classification,
            1 => Head::Regression,
            h => return Err(Error::Snapshot(format!("unknown head tag {h}"))),
        };
        let label_space = match r.u8()? {
            0 => {
                let n = r.u32()? as usize;
                let mut classes = Vec::with_capacity(n);
                for _ in 0..n {
                    let len = r.u32()? as usize;
                    let s = std::str::from_utf8(r.take(len)?)
                        .map_err(|_| Error::Snapshot("class name is not UTF-8".into()))?;
                    classes.push(s.to_owned());
                }
                LabelSpace::Categorical { classes }
            }
            1 => LabelSpace::Continuous {
                lo: r.f64()?,
                hi: r.f64()?,
            },
            t => return Err(Error::Snapshot(format!("unknown label space tag {t}"))),
        };
        let n_orders = r.u32()? as usize;
        let ngram_orders = (0..n_orders)
            .map(|_| r.u32().map(|o| o as usize))
            .collect::<Result<Vec<_>>>()?;
        let hash_dim = r.u64()? as usize;
        let pair_mode = match r.u8()? {
            0 => PairMode::Concat,
            1 => PairMode::ConcatNovelty,
            m => return Err(Error::Snapshot(format!("unknown pair mode tag {m}"))),
        };
        let n_bias = r.u64()? as usize;
        let n_weights = r.u64()? as usize;
        if r.remaining() != 8 * (n_bias + n_weights) {
            return Err(Error::Snapshot("truncated or oversized parameter block".into()));
        }
        let bias = (0..n_bias).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let weights = (0..n_weights).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let params = ModelParams {
            head,
            label_space,
            features: FeatureConfig {
                ngram_orders,
                hash_dim,
                pair_mode,
            },
            weights,
            bias,
        };
        params.validate()?;
        Ok(params)
    }

    /// SHA-256 of the binary snapshot, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelParams> {
        ModelParams::from_bytes(&fs::read(path)?)
    }

    /// Replace the output head for a new label space while keeping the
    /// feature space. Rows of target classes listed in `carry` (target
    /// class → source classes) start from the mean of the named source rows;
    /// every other row and bias starts at zero.
    pub fn swap_head(&self, target: &LabelSpace, carry: &[(String, Vec<String>)]) -> Result<ModelParams> {
        target.validate()?;
        let d = self.hash_dim();
        let outputs = target.num_outputs();
        let mut weights = vec![0.0; outputs * d];
        let mut bias = vec![0.0; outputs];
        for (dst, sources) in carry {
            let k = match target {
                LabelSpace::Categorical { .. } => target.class_index(dst).ok_or_else(|| {
                    Error::Config(format!("head mapping names unknown target class `{dst}`"))
                })?,
                LabelSpace::Continuous { .. } => 0,
            };
            if sources.is_empty() {
                continue;
            }
            let rows = sources
                .iter()
                .map(|s| {
                    self.label_space.class_index(s).ok_or_else(|| {
                        Error::Config(format!("head mapping names unknown source class `{s}`"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let n = rows.len() as f64;
            let dst_row = &mut weights[k * d..(k + 1) * d];
            for &src in &rows {
                for (w, s) in dst_row.iter_mut().zip(self.row(src)) {
                    *w += s / n;
                }
                bias[k] += self.bias[src] / n;
            }
        }
        Ok(ModelParams {
            head: Head::for_space(target),
            label_space: target.clone(),
            features: self.features.clone(),
            weights,
            bias,
        })
    }
}

impl Predictor for ModelParams {
    fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    fn predict(&self, example: &Example) -> Prediction {
        self.predict_features(&self.featurize(example))
    }
}

/// Free-function form of [`Predictor::predict`].
pub fn predict<P: Predictor + ?Sized>(model: &P, example: &Example) -> Prediction {
    model.predict(example)
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"SSMP";
const SNAPSHOT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_bits().to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Snapshot("unexpected end of snapshot".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
}
