//! Deterministic synthetic benchmark corpora.
//!
//! Every family is a pure function of `(spec, size, seed)`. Categorical
//! families assign classes round-robin before shuffling, so any corpus with
//! at least as many rows as classes contains every class.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lexicon::{self, DomainTables};
use super::{Dataset, Example, Label, LabelSpace, Task};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeywordSentimentParams {
    /// Probability that the recorded label is flipped.
    pub noise_rate: f64,
    pub min_cues: usize,
    pub max_cues: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// How many words of each sentiment lexicon are in use.
    pub lexicon_size: usize,
}

impl Default for KeywordSentimentParams {
    fn default() -> Self {
        KeywordSentimentParams {
            noise_rate: 0.02,
            min_cues: 2,
            max_cues: 4,
            min_len: 8,
            max_len: 14,
            lexicon_size: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NliDomain {
    Target,
    General,
    Shifted,
}

impl NliDomain {
    pub fn tables(self) -> DomainTables {
        match self {
            NliDomain::Target => lexicon::target_domain(),
            NliDomain::General => lexicon::general_domain(),
            NliDomain::Shifted => lexicon::shifted_domain(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairNliParams {
    pub domain: NliDomain,
    pub label_noise: f64,
    /// Share of contradictions built by negation rather than antonym swap.
    pub negation_rate: f64,
    /// Chance that an entailed hypothesis swaps its noun for a synonym.
    pub synonym_rate: f64,
    /// Chance that a neutral clause is joined by a connective rather than `and`.
    pub connective_rate: f64,
}

impl Default for PairNliParams {
    fn default() -> Self {
        PairNliParams {
            domain: NliDomain::Target,
            label_noise: 0.0,
            negation_rate: 0.25,
            synonym_rate: 0.3,
            connective_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftedClusterParams {
    /// Probability that an example comes from the minority subpopulation.
    pub minority_fraction: f64,
    /// Class cues carried by majority examples of the first class.
    pub cues_a: usize,
    /// Class cues carried by majority examples of the second class.
    pub cues_b: usize,
    /// Opposite-class cues carried by minority examples.
    pub decoys: usize,
    /// Genuine minority-marker cues carried by minority examples.
    pub markers: usize,
    pub length: usize,
    pub cue_vocab: usize,
    pub marker_vocab: usize,
    pub filler_vocab: usize,
}

impl Default for DriftedClusterParams {
    fn default() -> Self {
        DriftedClusterParams {
            minority_fraction: 0.2,
            cues_a: 3,
            cues_b: 2,
            decoys: 2,
            markers: 2,
            length: 10,
            cue_vocab: 15,
            marker_vocab: 10,
            filler_vocab: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeywordScoreParams {
    pub cues: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub lexicon_size: usize,
}

impl Default for KeywordScoreParams {
    fn default() -> Self {
        KeywordScoreParams {
            cues: 4,
            min_len: 8,
            max_len: 14,
            lexicon_size: 40,
        }
    }
}

/// One of the shipped synthetic task families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SynthSpec {
    /// Single sentences whose class is signalled by sentiment cue words.
    KeywordSentiment(KeywordSentimentParams),
    /// Premise/hypothesis pairs built by subsetting, antonym swap, negation
    /// and clause appending.
    PairOverlapNli(PairNliParams),
    /// Two classes with a minority subpopulation that mimics the other class.
    DriftedCluster(DriftedClusterParams),
    /// Continuous scores in `[0, 5]` signalled by the mix of cue words.
    KeywordScore(KeywordScoreParams),
}

impl SynthSpec {
    pub const FAMILIES: [&'static str; 4] = [
        "keyword-sentiment",
        "pair-overlap-nli",
        "drifted-cluster",
        "keyword-score",
    ];

    /// The family with default parameters.
    pub fn from_name(name: &str) -> Result<SynthSpec> {
        match name {
            "keyword-sentiment" => Ok(SynthSpec::KeywordSentiment(Default::default())),
            "pair-overlap-nli" => Ok(SynthSpec::PairOverlapNli(Default::default())),
            "drifted-cluster" => Ok(SynthSpec::DriftedCluster(Default::default())),
            "keyword-score" => Ok(SynthSpec::KeywordScore(Default::default())),
            other => Err(Error::Config(format!(
                "unknown synthetic family `{other}`; expected one of {:?}",
                Self::FAMILIES
            ))),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            SynthSpec::KeywordSentiment(_) => "keyword-sentiment",
            SynthSpec::PairOverlapNli(_) => "pair-overlap-nli",
            SynthSpec::DriftedCluster(_) => "drifted-cluster",
            SynthSpec::KeywordScore(_) => "keyword-score",
        }
    }

    pub fn label_space(&self) -> LabelSpace {
        let cat = |names: &[&str]| LabelSpace::Categorical {
            classes: names.iter().map(|s| s.to_string()).collect(),
        };
        match self {
            SynthSpec::KeywordSentiment(_) => cat(&["positive", "negative"]),
            SynthSpec::PairOverlapNli(_) => cat(&["entailment", "neutral", "contradiction"]),
            SynthSpec::DriftedCluster(_) => cat(&["class_a", "class_b"]),
            SynthSpec::KeywordScore(_) => LabelSpace::Continuous { lo: 0.0, hi: 5.0 },
        }
    }

    /// A train/test task with ids prefixed `train-` / `test-`.
    pub fn task(&self, train_size: usize, test_size: usize, seed: u64) -> Result<Task> {
        let train = synth_corpus(self, train_size, seed::derive(seed, "synth-train", 0))?;
        let test = synth_corpus(self, test_size, seed::derive(seed, "synth-test", 0))?;
        Task::new(
            self.family(),
            train.with_id_prefix("train-"),
            test.with_id_prefix("test-"),
        )
    }
}

/// Generate `size` examples of a synthetic family. Each example records its
/// generating class (or score) as its gold label.
pub fn synth_corpus(spec: &SynthSpec, size: usize, seed: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed);
    let space = spec.label_space();
    let examples: Vec<(String, Option<String>, Label)> = match spec {
        SynthSpec::KeywordSentiment(p) => keyword_sentiment(p, size, &mut rng)?,
        SynthSpec::PairOverlapNli(p) => pair_overlap_nli(p, size, &mut rng)?,
        SynthSpec::DriftedCluster(p) => drifted_cluster(p, size, &mut rng)?,
        SynthSpec::KeywordScore(p) => keyword_score(p, size, &mut rng)?,
    };
    let examples = examples
        .into_iter()
        .enumerate()
        .map(|(i, (a, b, label))| Example {
            id: i.to_string(),
            segment_a: a,
            segment_b: b,
            label: Some(label),
        })
        .collect();
    Dataset::new(spec.family(), space, examples)
}

type Row = (String, Option<String>, Label);

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// Round-robin class assignment, shuffled.
fn balanced_classes(size: usize, num_classes: usize, rng: &mut seed::Rng) -> Vec<usize> {
    let mut classes: Vec<usize> = (0..size).map(|i| i % num_classes).collect();
    classes.shuffle(rng);
    classes
}

fn flip(class: usize, num_classes: usize, rate: f64, rng: &mut seed::Rng) -> usize {
    if rate > 0.0 && rng.gen_bool(rate) {
        (class + rng.gen_range(1..num_classes)) % num_classes
    } else {
        class
    }
}

fn pick<'a>(words: &[&'a str], rng: &mut seed::Rng) -> &'a str {
    words[rng.gen_range(0..words.len())]
}

fn keyword_sentiment(p: &KeywordSentimentParams, size: usize, rng: &mut seed::Rng) -> Result<Vec<Row>> {
    check_prob("noise_rate", p.noise_rate)?;
    if p.min_cues == 0 || p.min_cues > p.max_cues || p.max_cues > p.min_len || p.min_len > p.max_len {
        return Err(Error::Config(
            "keyword-sentiment needs 1 <= min_cues <= max_cues <= min_len <= max_len".into(),
        ));
    }
    let n = p.lexicon_size.clamp(1, lexicon::SENTIMENT_POSITIVE.len());
    let lexicons = [
        &lexicon::SENTIMENT_POSITIVE[..n],
        &lexicon::SENTIMENT_NEGATIVE[..n],
    ];
    let classes = balanced_classes(size, 2, rng);
    Ok(classes
        .into_iter()
        .map(|class| {
            let len = rng.gen_range(p.min_len..=p.max_len);
            let cues = rng.gen_range(p.min_cues..=p.max_cues);
            let mut tokens: Vec<&str> = (0..cues).map(|_| pick(lexicons[class], rng)).collect();
            tokens.extend((cues..len).map(|_| pick(lexicon::FILLER, rng)));
            tokens.shuffle(rng);
            let label = flip(class, 2, p.noise_rate, rng);
            (tokens.join(" "), None, Label::Class(label))
        })
        .collect())
}

const VERBS: &[&str] = &["was", "seemed", "looked", "felt"];
const ADVERBS: &[&str] = &["very", "quite", "rather", "really"];
const CONJUNCTIONS: &[&str] = &["and", "but", "yet"];

struct Clause {
    noun: &'static str,
    verb: &'static str,
    adverb: Option<&'static str>,
    adjective: &'static str,
}

impl Clause {
    fn render(&self, noun: &str, negate: Option<&str>, adjective: &str) -> String {
        let mut parts = vec!["the", noun, self.verb];
        if let Some(n) = negate {
            parts.push(n);
        }
        if let Some(a) = self.adverb {
            parts.push(a);
        }
        parts.push(adjective);
        parts.join(" ")
    }

    fn text(&self) -> String {
        self.render(self.noun, None, self.adjective)
    }
}

fn antonym_of(word: &str) -> Option<&'static str> {
    lexicon::ANTONYMS.iter().find_map(|&(a, b)| {
        if a == word {
            Some(b)
        } else if b == word {
            Some(a)
        } else {
            None
        }
    })
}

fn pair_overlap_nli(p: &PairNliParams, size: usize, rng: &mut seed::Rng) -> Result<Vec<Row>> {
    for (name, v) in [
        ("label_noise", p.label_noise),
        ("negation_rate", p.negation_rate),
        ("synonym_rate", p.synonym_rate),
        ("connective_rate", p.connective_rate),
    ] {
        check_prob(name, v)?;
    }
    let tables = p.domain.tables();
    let adjectives: Vec<&str> = tables.antonym_pairs().flat_map(|(a, b)| [a, b]).collect();
    let nouns = &lexicon::NOUNS[tables.nouns.clone()];
    let synonyms = &lexicon::SYNONYMS[tables.synonyms.clone()];
    let fragments = &lexicon::FRAGMENTS[tables.fragments.clone()];

    let clause = |rng: &mut seed::Rng| Clause {
        noun: pick(nouns, rng),
        verb: pick(VERBS, rng),
        adverb: rng.gen_bool(0.3).then(|| pick(ADVERBS, rng)),
        adjective: pick(&adjectives, rng),
    };

    let classes = balanced_classes(size, 3, rng);
    Ok(classes
        .into_iter()
        .map(|class| {
            let first = clause(rng);
            let second = clause(rng);
            let premise = format!("{} {} {}", first.text(), pick(CONJUNCTIONS, rng), second.text());
            let chosen = if rng.gen_bool(0.5) { &first } else { &second };
            let hypothesis = match class {
                0 => {
                    let syn = synonyms.iter().find(|(w, _)| *w == chosen.noun).map(|(_, s)| *s);
                    match syn {
                        Some(s) if rng.gen_bool(p.synonym_rate) => {
                            chosen.render(s, None, chosen.adjective)
                        }
                        _ => chosen.text(),
                    }
                }
                1 => {
                    let joiner = if rng.gen_bool(p.connective_rate) {
                        pick(lexicon::CONNECTIVES, rng)
                    } else {
                        "and"
                    };
                    format!("{} {joiner} {}", chosen.text(), pick(fragments, rng))
                }
                _ => {
                    if rng.gen_bool(p.negation_rate) {
                        chosen.render(chosen.noun, Some(pick(lexicon::NEGATIONS, rng)), chosen.adjective)
                    } else {
                        let swapped = antonym_of(chosen.adjective).expect("adjectives come from antonym pairs");
                        chosen.render(chosen.noun, None, swapped)
                    }
                }
            };
            let label = flip(class, 3, p.label_noise, rng);
            (premise, Some(hypothesis), Label::Class(label))
        })
        .collect())
}

fn drifted_cluster(p: &DriftedClusterParams, size: usize, rng: &mut seed::Rng) -> Result<Vec<Row>> {
    check_prob("minority_fraction", p.minority_fraction)?;
    let longest = p.cues_a.max(p.cues_b).max(p.decoys + p.markers);
    if p.length < longest || p.cue_vocab == 0 || p.marker_vocab == 0 || p.filler_vocab == 0 {
        return Err(Error::Config(
            "drifted-cluster needs nonzero vocabularies and length >= cue count".into(),
        ));
    }
    let vocab = |offset: usize, n: usize| -> Vec<String> {
        (offset..offset + n).map(lexicon::pseudo_word).collect()
    };
    let cues = [vocab(0, p.cue_vocab), vocab(1000, p.cue_vocab)];
    let markers = [vocab(2000, p.marker_vocab), vocab(3000, p.marker_vocab)];
    let filler = vocab(10_000, p.filler_vocab);
    let draw = |words: &Vec<String>, rng: &mut seed::Rng| words[rng.gen_range(0..words.len())].clone();

    let classes = balanced_classes(size, 2, rng);
    Ok(classes
        .into_iter()
        .map(|class| {
            let minority = rng.gen_bool(p.minority_fraction);
            let mut tokens: Vec<String> = Vec::with_capacity(p.length);
            if minority {
                tokens.extend((0..p.decoys).map(|_| draw(&cues[1 - class], rng)));
                tokens.extend((0..p.markers).map(|_| draw(&markers[class], rng)));
            } else {
                let n = if class == 0 { p.cues_a } else { p.cues_b };
                tokens.extend((0..n).map(|_| draw(&cues[class], rng)));
            }
            while tokens.len() < p.length {
                tokens.push(draw(&filler, rng));
            }
            tokens.shuffle(rng);
            (tokens.join(" "), None, Label::Class(class))
        })
        .collect())
}

fn keyword_score(p: &KeywordScoreParams, size: usize, rng: &mut seed::Rng) -> Result<Vec<Row>> {
    if p.cues == 0 || p.cues > p.min_len || p.min_len > p.max_len {
        return Err(Error::Config(
            "keyword-score needs 1 <= cues <= min_len <= max_len".into(),
        ));
    }
    let n = p.lexicon_size.clamp(1, lexicon::SENTIMENT_POSITIVE.len());
    Ok((0..size)
        .map(|_| {
            let score: f64 = rng.gen_range(0.0..=5.0);
            let score = (score * 100.0).round() / 100.0;
            let len = rng.gen_range(p.min_len..=p.max_len);
            let mut tokens: Vec<&str> = (0..p.cues)
                .map(|_| {
                    if rng.gen_bool(score / 5.0) {
                        pick(&lexicon::SENTIMENT_POSITIVE[..n], rng)
                    } else {
                        pick(&lexicon::SENTIMENT_NEGATIVE[..n], rng)
                    }
                })
                .collect();
            tokens.extend((p.cues..len).map(|_| pick(lexicon::FILLER, rng)));
            tokens.shuffle(rng);
            (tokens.join(" "), None, Label::Value(score))
        })
        .collect())
}
