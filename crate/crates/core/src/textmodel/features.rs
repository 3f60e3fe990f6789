use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::corpus::Example;
use crate::{Error, Result};

/// Reserved token placed between the two segments of a pair. The tokenizer
/// strips brackets, so it can never be produced from text.
pub const SEPARATOR: &str = "[SEP]";

/// How a segment pair is turned into features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// `a [SEP] b`, then n-grams over the joined sequence.
    Concat,
    /// As `Concat`, plus one feature per second-segment token that does not
    /// occur in the first segment and a shared count of such tokens.
    ConcatNovelty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub ngram_orders: Vec<usize>,
    pub hash_dim: usize,
    pub pair_mode: PairMode,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            ngram_orders: vec![1, 2],
            hash_dim: 1 << 18,
            pair_mode: PairMode::Concat,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.hash_dim.is_power_of_two() || self.hash_dim > u32::MAX as usize {
            return Err(Error::Config(format!(
                "hash_dim must be a power of two below 2^32, got {}",
                self.hash_dim
            )));
        }
        if self.ngram_orders.is_empty() || self.ngram_orders.contains(&0) {
            return Err(Error::Config(
                "ngram_orders must be a nonempty set of positive orders".into(),
            ));
        }
        Ok(())
    }
}

/// Sparse feature counts, sorted by index with no repeated indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureVector {
    pub entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    fn from_indices(mut indices: Vec<u32>) -> FeatureVector {
        indices.sort_unstable();
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(indices.len());
        for i in indices {
            match entries.last_mut() {
                Some((last, count)) if *last == i => *count += 1.0,
                _ => entries.push((i, 1.0)),
            }
        }
        FeatureVector { entries }
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, c)| c).sum()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Dot product with one dense row.
    #[inline]
    pub fn dot(&self, row: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, c)| row[i as usize] * c)
            .sum()
    }
}

/// Lowercase, split on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

fn bucket<'a>(namespace: u8, parts: impl IntoIterator<Item = &'a str>, dim: usize) -> u32 {
    let mut h = FnvHasher::default();
    h.write_u8(namespace);
    for p in parts {
        h.write(p.as_bytes());
        h.write_u8(0x1f);
    }
    // FNV leaves the low bits weakly mixed; finish with a splitmix round.
    let mut z = h.finish();
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z & (dim as u64 - 1)) as u32
}

const NS_NGRAM: u8 = 1;
const NS_NOVEL: u8 = 2;
const NS_NOVEL_COUNT: u8 = 3;

/// Hashed n-gram counts for one example.
pub fn featurize(example: &Example, config: &FeatureConfig) -> FeatureVector {
    let tokens_a = tokenize(&example.segment_a);
    let mut seq: Vec<&str> = tokens_a.iter().map(String::as_str).collect();
    let tokens_b = example.segment_b.as_deref().map(tokenize);
    if let Some(b) = &tokens_b {
        seq.push(SEPARATOR);
        seq.extend(b.iter().map(String::as_str));
    }

    let mut indices = Vec::new();
    for &order in &config.ngram_orders {
        if order > seq.len() {
            continue;
        }
        for gram in seq.windows(order) {
            let mut parts = Vec::with_capacity(order + 1);
            let tag = order.to_string();
            parts.push(tag.as_str());
            parts.extend(gram.iter().copied());
            indices.push(bucket(NS_NGRAM, parts, config.hash_dim));
        }
    }

    if let (PairMode::ConcatNovelty, Some(b)) = (config.pair_mode, &tokens_b) {
        for tok in b.iter().filter(|t| !tokens_a.contains(t)) {
            indices.push(bucket(NS_NOVEL, [tok.as_str()], config.hash_dim));
            indices.push(bucket(NS_NOVEL_COUNT, [], config.hash_dim));
        }
    }

    FeatureVector::from_indices(indices)
}
