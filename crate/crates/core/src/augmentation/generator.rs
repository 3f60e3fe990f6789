use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::lexicon;
use crate::{seed, Error, Result};

/// Labels the rule-based generator knows how to realize.
pub const NLI_LABELS: [&str; 3] = ["entailment", "neutral", "contradiction"];

/// Word tables driving the rule-based transformations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleTables {
    pub antonyms: Vec<(String, String)>,
    pub synonyms: Vec<(String, String)>,
    /// Unsupported clauses appended for neutral outputs.
    pub fragments: Vec<String>,
    pub negations: Vec<String>,
    pub connectives: Vec<String>,
    /// Verbs after which a negation may be inserted.
    pub copulas: Vec<String>,
    /// Tokens that separate clauses.
    pub conjunctions: Vec<String>,
    /// Tokens that may be dropped without changing meaning.
    pub modifiers: Vec<String>,
}

fn owned(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| (*w).to_owned()).collect()
}

fn owned_pairs(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs.iter().map(|(a, b)| ((*a).to_owned(), (*b).to_owned())).collect()
}

impl Default for RuleTables {
    fn default() -> Self {
        RuleTables {
            antonyms: owned_pairs(lexicon::ANTONYMS),
            synonyms: owned_pairs(lexicon::SYNONYMS),
            fragments: owned(lexicon::FRAGMENTS),
            negations: owned(lexicon::NEGATIONS),
            connectives: owned(lexicon::CONNECTIVES),
            copulas: owned(&["is", "was", "are", "were", "seemed", "looked", "felt", "seems", "looks", "feels"]),
            conjunctions: owned(&["and", "but", "yet", "or"]),
            modifiers: owned(&["very", "quite", "rather", "really"]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorKind {
    RuleBased {
        #[serde(default)]
        tables: RuleTables,
    },
    /// Rule-based output where each sample realizes a different label than
    /// requested with probability `flip_rate`.
    Noisy {
        flip_rate: f64,
        #[serde(default)]
        tables: RuleTables,
    },
    /// A long-running command speaking the line protocol: one
    /// `label<TAB>sentence` request per line, answered by candidate lines
    /// and a terminating empty line.
    External { command: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub samples_per_input: usize,
    /// Advisory for stochastic external generators.
    pub top_k: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            kind: GeneratorKind::RuleBased {
                tables: RuleTables::default(),
            },
            samples_per_input: 100,
            top_k: 40,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_input == 0 {
            return Err(Error::Config("samples_per_input must be at least 1".into()));
        }
        match &self.kind {
            GeneratorKind::Noisy { flip_rate, .. } if !(0.0..=1.0).contains(flip_rate) => {
                Err(Error::Config(format!("flip_rate must lie in [0, 1], got {flip_rate}")))
            }
            GeneratorKind::External { command } if command.is_empty() => {
                Err(Error::Config("external generator needs a command".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Source of raw candidate hypotheses.
pub trait CandidateGenerator: Send + Sync {
    /// Up to `samples` raw outputs; duplicates are allowed and removed by
    /// the caller.
    fn raw(&self, label: &str, sentence: &str, samples: usize, seed: u64) -> Result<Vec<String>>;
}

/// A generator built from its spec.
pub struct Generator {
    pub spec: GeneratorSpec,
    backend: Box<dyn CandidateGenerator>,
}

impl Generator {
    pub fn new(spec: GeneratorSpec) -> Result<Generator> {
        spec.validate()?;
        let backend: Box<dyn CandidateGenerator> = match &spec.kind {
            GeneratorKind::RuleBased { tables } => Box::new(RuleBased::new(tables.clone(), 0.0)),
            GeneratorKind::Noisy { flip_rate, tables } => Box::new(RuleBased::new(tables.clone(), *flip_rate)),
            GeneratorKind::External { command } => Box::new(External::spawn(command)?),
        };
        Ok(Generator { spec, backend })
    }

    /// Wrap a custom backend.
    pub fn with_backend(spec: GeneratorSpec, backend: Box<dyn CandidateGenerator>) -> Result<Generator> {
        spec.validate()?;
        Ok(Generator { spec, backend })
    }
}

fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Candidate hypotheses for `(label, sentence)`: whitespace-normalized,
/// deduplicated in first-seen order, at most `samples_per_input` of them.
pub fn generate_candidates(generator: &Generator, label: &str, sentence: &str, seed: u64) -> Result<Vec<String>> {
    if sentence.trim().is_empty() {
        return Err(Error::Validation("cannot generate from an empty sentence".into()));
    }
    let limit = generator.spec.samples_per_input;
    let raw = generator.backend.raw(label, sentence, limit, seed)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for c in raw {
        let c = normalize(&c);
        if !c.is_empty() && seen.insert(c.clone()) {
            out.push(c);
            if out.len() == limit {
                break;
            }
        }
    }
    Ok(out)
}

struct RuleBased {
    tables: RuleTables,
    flip_rate: f64,
}

impl RuleBased {
    fn new(tables: RuleTables, flip_rate: f64) -> RuleBased {
        RuleBased { tables, flip_rate }
    }

    fn is(&self, list: &[String], word: &str) -> bool {
        list.iter().any(|w| w == word)
    }

    fn lookup<'a>(pairs: &'a [(String, String)], word: &str) -> Option<&'a str> {
        pairs.iter().find_map(|(a, b)| {
            if a == word {
                Some(b.as_str())
            } else if b == word {
                Some(a.as_str())
            } else {
                None
            }
        })
    }

    /// A single clause (usually) or the whole sentence.
    fn base<'a>(&self, tokens: &[&'a str], rng: &mut seed::Rng) -> Vec<&'a str> {
        let clauses: Vec<&[&str]> = tokens
            .split(|t| self.is(&self.tables.conjunctions, t))
            .filter(|c| !c.is_empty())
            .collect();
        if clauses.len() >= 2 && rng.gen_bool(0.7) {
            clauses[rng.gen_range(0..clauses.len())].to_vec()
        } else {
            tokens.to_vec()
        }
    }

    fn entail(&self, tokens: &[&str], rng: &mut seed::Rng) -> Option<String> {
        let mut out: Vec<String> = self.base(tokens, rng).iter().map(|t| (*t).to_owned()).collect();
        if rng.gen_bool(0.5) {
            out.retain(|t| !self.is(&self.tables.modifiers, t));
        }
        for t in out.iter_mut() {
            if let Some(s) = Self::lookup(&self.tables.synonyms, t) {
                if rng.gen_bool(0.5) {
                    *t = s.to_owned();
                }
            }
        }
        (!out.is_empty()).then(|| out.join(" "))
    }

    fn contradict(&self, tokens: &[&str], rng: &mut seed::Rng) -> Option<String> {
        let mut out: Vec<String> = self.base(tokens, rng).iter().map(|t| (*t).to_owned()).collect();
        let negatable: Vec<usize> = (0..out.len())
            .filter(|&i| self.is(&self.tables.copulas, &out[i]))
            .filter(|&i| out.get(i + 1).is_none_or(|n| !self.is(&self.tables.negations, n)))
            .collect();
        let swappable: Vec<usize> = (0..out.len())
            .filter(|&i| Self::lookup(&self.tables.antonyms, &out[i]).is_some())
            .collect();
        let negate = match (negatable.is_empty(), swappable.is_empty()) {
            (true, true) => return None,
            (false, true) => true,
            (true, false) => false,
            (false, false) => rng.gen_bool(0.3),
        };
        if negate && !self.tables.negations.is_empty() {
            let i = negatable[rng.gen_range(0..negatable.len())];
            let n = &self.tables.negations[rng.gen_range(0..self.tables.negations.len())];
            out.insert(i + 1, n.clone());
        } else if !swappable.is_empty() {
            let i = swappable[rng.gen_range(0..swappable.len())];
            out[i] = Self::lookup(&self.tables.antonyms, &out[i]).expect("filtered").to_owned();
        } else {
            return None;
        }
        Some(out.join(" "))
    }

    fn neutral(&self, tokens: &[&str], rng: &mut seed::Rng) -> Option<String> {
        if self.tables.fragments.is_empty() {
            return None;
        }
        let base = self.base(tokens, rng).join(" ");
        let joiner = if !self.tables.connectives.is_empty() && rng.gen_bool(0.5) {
            self.tables.connectives[rng.gen_range(0..self.tables.connectives.len())].as_str()
        } else {
            "and"
        };
        let fragment = &self.tables.fragments[rng.gen_range(0..self.tables.fragments.len())];
        Some(format!("{base} {joiner} {fragment}"))
    }
}

impl CandidateGenerator for RuleBased {
    fn raw(&self, label: &str, sentence: &str, samples: usize, seed: u64) -> Result<Vec<String>> {
        let requested = NLI_LABELS
            .iter()
            .position(|l| *l == label)
            .ok_or_else(|| Error::Generator(format!("rule-based generator has no rules for `{label}`")))?;
        let lowered = sentence.to_lowercase();
        let tokens: Vec<&str> = lowered.split_whitespace().collect();
        let mut rng = seed::rng(seed);
        // Rule outputs repeat often; oversample so deduplication still
        // leaves close to `samples` distinct strings when they exist.
        let attempts = samples.saturating_mul(4);
        let mut out = Vec::with_capacity(samples);
        for _ in 0..attempts {
            let mut realized = requested;
            if self.flip_rate > 0.0 && rng.gen_bool(self.flip_rate) {
                realized = (requested + rng.gen_range(1..NLI_LABELS.len())) % NLI_LABELS.len();
            }
            let c = match realized {
                0 => self.entail(&tokens, &mut rng),
                1 => self.neutral(&tokens, &mut rng),
                _ => self.contradict(&tokens, &mut rng),
            };
            out.extend(c);
        }
        Ok(out)
    }
}

struct ExternalProcess {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

struct External {
    process: Mutex<ExternalProcess>,
}

impl External {
    fn spawn(command: &[String]) -> Result<External> {
        let mut child = Command::new(&command[0])
            .args(&command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Generator(format!("cannot start `{}`: {e}", command[0])))?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = BufReader::new(child.stdout.take().expect("piped"));
        Ok(External {
            process: Mutex::new(ExternalProcess { child, stdin, stdout }),
        })
    }
}

impl CandidateGenerator for External {
    fn raw(&self, label: &str, sentence: &str, samples: usize, _seed: u64) -> Result<Vec<String>> {
        let flat = normalize(sentence);
        let mut p = self.process.lock().map_err(|_| Error::Generator("generator lock poisoned".into()))?;
        let fail = |e: std::io::Error| Error::Generator(format!("external generator: {e}"));
        writeln!(p.stdin, "{label}\t{flat}").map_err(fail)?;
        p.stdin.flush().map_err(fail)?;
        let mut out = Vec::new();
        loop {
            let mut line = String::new();
            if p.stdout.read_line(&mut line).map_err(fail)? == 0 {
                return Err(Error::Generator("external generator closed its output".into()));
            }
            let line = line.trim_end_matches(['\n', '\r']);
            if line.is_empty() {
                break;
            }
            if out.len() < samples.saturating_mul(4) {
                out.push(line.to_owned());
            }
        }
        Ok(out)
    }
}

impl Drop for External {
    fn drop(&mut self) {
        if let Ok(p) = self.process.get_mut() {
            let _ = p.child.kill();
            let _ = p.child.wait();
        }
    }
}
