#![allow(dead_code)]

use num_bigint::{BigInt, Sign};

const SHIFT: i64 = 1074;

/// `v · 2^1074` as an exact integer.
pub fn scaled(v: f64) -> BigInt {
    assert!(v.is_finite());
    if v == 0.0 {
        return BigInt::from(0);
    }
    let bits = v.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | 1 << 52, exp - 1075) };
    let m = BigInt::from(mant) << ((e + SHIFT) as usize);
    if v < 0.0 {
        -m
    } else {
        m
    }
}

fn pow2(e: i64) -> f64 {
    assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Nearest double to `p / q` (ties to even), `q > 0`.
pub fn round_ratio(p: &BigInt, q: &BigInt) -> f64 {
    assert!(q.sign() == Sign::Plus);
    if p.sign() == Sign::NoSign {
        return 0.0;
    }
    let neg = p.sign() == Sign::Minus;
    let a = p.magnitude().clone();
    let b = q.magnitude().clone();
    // Choose k with 2^52 <= a·2^k / b < 2^53.
    let mut k = 52 - (a.bits() as i64 - b.bits() as i64);
    let scaled = |k: i64| {
        if k >= 0 {
            (a.clone() << k as usize, b.clone())
        } else {
            (a.clone(), b.clone() << (-k) as usize)
        }
    };
    loop {
        let (x, y) = scaled(k);
        let quo = &x / &y;
        if quo.bits() > 53 {
            k -= 1;
        } else if quo.bits() < 53 {
            k += 1;
        } else {
            break;
        }
    }
    k = k.min(SHIFT);
    let (x, y) = scaled(k);
    let mut quo = &x / &y;
    let rem2 = (&x % &y) << 1usize;
    if rem2 > y || rem2 == y && quo.bit(0) {
        quo += 1u32;
    }
    let q_f = quo.to_u64_digits().first().copied().unwrap_or(0) as f64;
    let v = q_f * pow2(-(k / 2)) * pow2(-(k - k / 2));
    if neg {
        -v
    } else {
        v
    }
}

/// Correctly rounded mean computed with big integers.
pub fn oracle_mean(values: &[f64]) -> f64 {
    let sum: BigInt = values.iter().map(|v| scaled(*v)).sum();
    let den = BigInt::from(values.len()) << SHIFT as usize;
    round_ratio(&sum, &den)
}

/// Correctly rounded sum computed with big integers.
pub fn oracle_sum(values: &[f64]) -> f64 {
    let sum: BigInt = values.iter().map(|v| scaled(*v)).sum();
    round_ratio(&sum, &(BigInt::from(1) << SHIFT as usize))
}

use semisup::corpus::{Dataset, Example, Label, LabelSpace};
use semisup::textmodel::{
    featurize, gradient, init_params, objective, Batch, FeatureConfig, FeatureVector, InitScheme,
    ModelParams, PairMode,
};

const WORDS: [&str; 12] = [
    "amber", "birch", "cedar", "dune", "ember", "fjord", "grove", "heath", "inlet", "jade", "knoll",
    "lagoon",
];

/// Small deterministic dataset; labels follow the first word with some
/// noise so the problem is not separable.
pub fn small_dataset(space: &LabelSpace, n: usize, seed: u64) -> Dataset {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let examples = (0..n)
        .map(|i| {
            let len = rng.gen_range(2..6);
            let words: Vec<&str> = (0..len).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
            let first = WORDS.iter().position(|w| *w == words[0]).unwrap();
            let label = match space {
                LabelSpace::Categorical { classes } => {
                    let c = if rng.gen_bool(0.2) { rng.gen_range(0..classes.len()) } else { first % classes.len() };
                    Label::Class(c)
                }
                LabelSpace::Continuous { lo, hi } => {
                    Label::Value((lo + (hi - lo) * (first as f64 / WORDS.len() as f64) + rng.gen_range(-0.1..0.1)).clamp(*lo, *hi))
                }
            };
            Example::single(format!("e{i}"), words.join(" "), Some(label))
        })
        .collect();
    Dataset::new("small", space.clone(), examples).unwrap()
}

pub fn unigram_features(hash_dim: usize) -> FeatureConfig {
    FeatureConfig {
        ngram_orders: vec![1],
        hash_dim,
        pair_mode: PairMode::Concat,
    }
}

/// Largest relative error between the analytic gradient and central
/// differences with step `h`, over all parameters.
pub fn gradient_check(params: &ModelParams, batch: &Batch, l2: f64, h: f64) -> f64 {
    let (gw, gb) = gradient(params, batch, l2);
    let analytic: Vec<f64> = gw.into_iter().chain(gb).collect();
    let nw = params.weights.len();
    let numeric: Vec<f64> = (0..analytic.len())
        .map(|i| {
            let bump = |delta: f64| {
                let mut p = params.clone();
                if i < nw {
                    p.weights[i] += delta;
                } else {
                    p.bias[i - nw] += delta;
                }
                objective(&p, batch, l2)
            };
            (bump(h) - bump(-h)) / (2.0 * h)
        })
        .collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-12)
}

/// Softmax cross-entropy plus `l2/2·|W|²`, written out independently of
/// the crate's trainer.
fn reference_objective(x: &[FeatureVector], y: &[usize], classes: usize, dim: usize, theta: &[f64], l2: f64) -> f64 {
    let (w, b) = theta.split_at(classes * dim);
    let mut loss = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let z: Vec<f64> = (0..classes)
            .map(|k| b[k] + xi.entries.iter().map(|&(j, c)| w[k * dim + j as usize] * c).sum::<f64>())
            .collect();
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - z[yi];
    }
    loss / x.len() as f64 + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Minimum of the regularized training objective by cyclic coordinate
/// search with golden-section line searches.
pub fn coordinate_search_minimum(data: &Dataset, features: &FeatureConfig, l2: f64) -> f64 {
    let classes = data.label_space.num_outputs();
    let dim = features.hash_dim;
    let x: Vec<FeatureVector> = data.examples.iter().map(|e| featurize(e, features)).collect();
    let y: Vec<usize> = data.examples.iter().map(|e| e.label.unwrap().class().unwrap()).collect();
    let mut theta = vec![0.0; classes * dim + classes];
    let f = |t: &[f64]| reference_objective(&x, &y, classes, dim, t, l2);
    let mut current = f(&theta);
    let mut radius = 4.0;
    for _sweep in 0..2000 {
        let before = current;
        for i in 0..theta.len() {
            let mut t = theta.clone();
            let mut line = |v: f64| {
                t[i] = v;
                f(&t)
            };
            let (mut a, mut b) = (theta[i] - radius, theta[i] + radius);
            let g = (5f64.sqrt() - 1.0) / 2.0;
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let (mut fc, mut fd) = (line(c), line(d));
            while b - a > 1e-10 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = line(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = line(d);
                }
            }
            let v = (a + b) / 2.0;
            let fv = line(v);
            if fv < current {
                theta[i] = v;
                current = fv;
            }
        }
        if before - current < 1e-13 {
            break;
        }
        radius = (radius * 0.7).max(0.05);
    }
    current
}

pub fn zeros(space: &LabelSpace, features: &FeatureConfig) -> ModelParams {
    init_params(space, features, 0, InitScheme::Zeros).unwrap()
}

/// Every contract of a few-shot split: exact per-stratum counts, dev size,
/// disjoint parts that cover the training partition.
pub fn check_few_shot_split(
    task: &semisup::corpus::Task,
    split: &semisup::corpus::RegimeSplit,
    k: usize,
    dev_size: usize,
    num_bins: usize,
) -> Result<(), String> {
    use std::collections::HashSet;
    let strata = match task.label_space() {
        LabelSpace::Categorical { classes } => classes.len(),
        LabelSpace::Continuous { .. } => num_bins,
    };
    let mut counts = vec![0usize; strata];
    for e in &split.train.examples {
        let s = match (task.label_space(), e.label.unwrap()) {
            (LabelSpace::Categorical { .. }, Label::Class(c)) => c,
            (LabelSpace::Continuous { lo, hi }, Label::Value(v)) => {
                semisup::corpus::bin_of(v, *lo, *hi, num_bins)
            }
            _ => return Err(format!("label of `{}` does not match the space", e.id)),
        };
        counts[s] += 1;
    }
    if counts.iter().any(|c| *c != k) {
        return Err(format!("per-stratum counts {counts:?}, expected {k} each"));
    }
    if split.dev.len() != dev_size {
        return Err(format!("dev size {} != {dev_size}", split.dev.len()));
    }
    let train: HashSet<&str> = split.train.ids().collect();
    let dev: HashSet<&str> = split.dev.ids().collect();
    let pool: HashSet<&str> = split.pool.ids().collect();
    if !train.is_disjoint(&dev) || !train.is_disjoint(&pool) || !dev.is_disjoint(&pool) {
        return Err("train, dev and pool overlap".into());
    }
    let all: HashSet<&str> = task.train.ids().collect();
    let union: HashSet<&str> = train.iter().chain(&dev).chain(&pool).copied().collect();
    if union != all {
        return Err("train, dev and pool do not cover the training partition".into());
    }
    if split.pool.examples.iter().any(|e| e.label.is_some()) {
        return Err("pool carries labels".into());
    }
    Ok(())
}

pub mod tau {
    use semisup::augmentation::{score_pool, Generator, GeneratorKind, GeneratorSpec, ScoredPool, TAConfig};
    use semisup::corpus::{strip_labels, synth_corpus, Dataset, NliDomain, PairNliParams, SynthSpec};
    use semisup::textmodel::{
        evaluate, init_params, train, FeatureConfig, InitScheme, Metric, ModelParams, PairMode, TrainConfig,
    };

    /// Auxiliary classifier, its scored candidates from a generator that
    /// flips half of its labels, the aux dev set and the selection budget.
    pub struct NoisyFixture {
        pub classifier: ModelParams,
        pub scored: ScoredPool,
        pub aux_dev: Dataset,
        pub budget: TrainConfig,
        pub grid: Vec<f64>,
    }

    fn nli(domain: NliDomain, size: usize, seed: u64) -> Dataset {
        let spec = SynthSpec::PairOverlapNli(PairNliParams { domain, ..Default::default() });
        synth_corpus(&spec, size, seed).unwrap()
    }

    pub fn noisy_fixture(seed: u64) -> NoisyFixture {
        let aux_train = nli(NliDomain::General, 1000, 21);
        let aux_dev = nli(NliDomain::General, 300, 22).with_id_prefix("dev-");
        let target = nli(NliDomain::Target, 60, 23);
        let features = FeatureConfig {
            hash_dim: 1 << 14,
            pair_mode: PairMode::ConcatNovelty,
            ..Default::default()
        };
        let cfg = TrainConfig { seed, ..TrainConfig::default() };
        let init = init_params(&aux_train.label_space, &features, 0, InitScheme::Zeros).unwrap();
        let classifier = train(&init, &aux_train, &cfg, Some(&aux_dev)).unwrap().params;
        let generator = Generator::new(GeneratorSpec {
            kind: GeneratorKind::Noisy {
                flip_rate: 0.5,
                tables: Default::default(),
            },
            samples_per_input: 20,
            top_k: 40,
        })
        .unwrap();
        let labels = aux_train.label_space.classes().to_vec();
        let scored = score_pool(&strip_labels(&target), &generator, &classifier, &labels, seed).unwrap();
        let ta = TAConfig::default();
        NoisyFixture {
            classifier,
            scored,
            aux_dev,
            budget: ta.select_budget(&cfg),
            grid: ta.tau_grid,
        }
    }

    /// Aux-dev accuracy at every grid point, filtering by hand.
    pub fn exhaustive(f: &NoisyFixture) -> Vec<(f64, Option<f64>)> {
        f.grid
            .iter()
            .map(|&tau| {
                let kept: Vec<_> = f
                    .scored
                    .candidates
                    .iter()
                    .filter(|c| c.predicted == c.label && c.probability > tau)
                    .collect();
                if kept.is_empty() {
                    return (tau, None);
                }
                let examples = kept
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        semisup::corpus::Example::pair(
                            format!("k{i}"),
                            c.premise.clone(),
                            c.hypothesis.clone(),
                            Some(semisup::corpus::Label::Class(c.label)),
                        )
                    })
                    .collect();
                let data = Dataset::new("kept", f.classifier.label_space.clone(), examples).unwrap();
                let tuned = train(&f.classifier, &data, &f.budget, None).unwrap().params;
                (tau, Some(evaluate(&tuned, &f.aux_dev, &Metric::Accuracy).unwrap()))
            })
            .collect()
    }
}

/// Broad-mode invariants of one run: student set size, student start point,
/// full re-annotation in pool order, iteration bound and convergence.
pub fn check_broad_invariants(
    result: &semisup::selftrain::SelfTrainResult,
    f0: &ModelParams,
    labeled: usize,
    pool: &semisup::corpus::UnlabeledPool,
) -> Result<(), String> {
    let st = &result.config;
    let n = pool.len();
    if result.per_iteration.is_empty() || result.per_iteration.len() > st.max_iterations {
        return Err(format!("{} iterations", result.per_iteration.len()));
    }
    if result.pseudo_labels.len() != result.per_iteration.len() {
        return Err("one pseudo-label set per iteration expected".into());
    }
    let f0_hash = f0.content_hash();
    for (rec, set) in result.per_iteration.iter().zip(&result.pseudo_labels) {
        let expected = if st.drop_lowest_confidence_fraction == 0.0 { n } else { rec.pseudo_labeled };
        if rec.train_size != labeled + expected || rec.pseudo_labeled != expected {
            return Err(format!("iteration {}: train size {} != {} + {}", rec.iteration, rec.train_size, labeled, expected));
        }
        if rec.student_init_hash != f0_hash {
            return Err(format!("iteration {}: student did not start from f0", rec.iteration));
        }
        if set.len() != n || set.entries.iter().zip(&pool.examples).any(|(e, x)| e.id != x.id) {
            return Err(format!("iteration {}: annotation does not cover the pool in order", rec.iteration));
        }
    }
    if let Some(at) = result.converged_at {
        let tail = &result.per_iteration[..at];
        if at != result.per_iteration.len() || at < st.agreement_patience {
            return Err("convergence must end the run".into());
        }
        let agreeing = tail[at - st.agreement_patience..]
            .iter()
            .all(|r| r.agreement.is_some_and(|a| a >= st.agreement_threshold));
        if !agreeing {
            return Err("converged without the required agreement streak".into());
        }
    }
    Ok(())
}

/// Largest relative gradient error over 20 random points, alternating
/// categorical and continuous heads.
pub fn worst_gradient_error() -> f64 {
    let features = unigram_features(16);
    let spaces = [
        LabelSpace::categorical(["a", "b", "c"]).unwrap(),
        LabelSpace::continuous(0.0, 5.0).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for point in 0..20u64 {
        let space = &spaces[(point % 2) as usize];
        let data = small_dataset(space, 12, 100 + point);
        let params = init_params(space, &features, point, InitScheme::Random { scale: 1.0 }).unwrap();
        let batch = Batch::from_dataset(&params, &data).unwrap();
        worst = worst.max(gradient_check(&params, &batch, 0.01, 1e-5));
    }
    worst
}

/// SGD objective and the coordinate-search minimum on the fixed
/// 20-example, 16-bucket instance.
pub fn convex_oracle() -> (f64, f64) {
    use semisup::textmodel::{train, Stopping, TrainConfig};
    let space = LabelSpace::categorical(["a", "b"]).unwrap();
    let features = unigram_features(16);
    let data = small_dataset(&space, 20, 7);
    let l2 = 0.05;
    let oracle = coordinate_search_minimum(&data, &features, l2);
    let cfg = TrainConfig {
        learning_rate: 0.2,
        batch_size: 20,
        l2,
        stopping: Stopping::FixedSteps {
            total: 20_000,
            checkpoint_every: 20_000,
            average_last: 1,
        },
        ..TrainConfig::default()
    };
    let trained = train(&zeros(&space, &features), &data, &cfg, None).unwrap();
    let batch = Batch::from_dataset(&trained.params, &data).unwrap();
    (objective(&trained.params, &batch, l2), oracle)
}

/// fixed_steps(512, 30, 5): 17 checkpoints and a bit-exact mean of the
/// last five snapshots.
pub fn check_dev_free_average() -> Result<(), String> {
    use semisup::textmodel::{average_checkpoints, train, Stopping, TrainConfig};
    let space = LabelSpace::categorical(["a", "b", "c"]).unwrap();
    let features = unigram_features(64);
    let data = small_dataset(&space, 40, 3);
    let cfg = TrainConfig {
        batch_size: 8,
        stopping: Stopping::dev_free(),
        ..TrainConfig::default()
    };
    let trained = train(&zeros(&space, &features), &data, &cfg, None).unwrap();
    let steps: Vec<usize> = (1..=17).map(|i| 30 * i).collect();
    if trained.trace.checkpoint_steps != steps {
        return Err(format!("checkpoints at {:?}", trained.trace.checkpoint_steps));
    }
    if trained.trace.steps_run != 512 {
        return Err(format!("{} steps run", trained.trace.steps_run));
    }
    let snaps = &trained.trace.averaged;
    if snaps.len() != 5 {
        return Err(format!("{} snapshots averaged", snaps.len()));
    }
    let columns = [
        (&trained.params.weights, snaps.iter().map(|s| &s.weights).collect::<Vec<_>>()),
        (&trained.params.bias, snaps.iter().map(|s| &s.bias).collect::<Vec<_>>()),
    ];
    for (got, sources) in columns {
        for (i, w) in got.iter().enumerate() {
            let column: Vec<f64> = sources.iter().map(|s| s[i]).collect();
            if w.to_bits() != oracle_mean(&column).to_bits() {
                return Err(format!("parameter {i}: {w} is not the exact mean of {column:?}"));
            }
        }
    }
    if trained.params.to_bytes() != average_checkpoints(snaps).unwrap().to_bytes() {
        return Err("snapshot bytes differ from the averaged checkpoints".into());
    }
    Ok(())
}

pub mod filtering {
    use proptest::prelude::*;
    use proptest::test_runner::TestCaseError;
    use semisup::augmentation::{filter_candidates, AugmentedExample, NLI_LABELS};
    use semisup::corpus::{Example, LabelSpace};
    use semisup::textmodel::{init_params, predict, FeatureConfig, InitScheme, PairMode, Prediction};

    const WORDS: [&str; 10] = [
        "river", "stone", "quiet", "ran", "blue", "the", "not", "old", "sang", "tower",
    ];

    pub fn sentence() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(&WORDS[..]), 1..7).prop_map(|w| w.join(" "))
    }

    /// Kept sets are subsequences of the candidates, shrink as tau grows,
    /// and every kept example re-verifies against the classifier.
    pub fn check_case(
        model_seed: u64,
        premise: &str,
        candidates: &[String],
        label: usize,
        t1: f64,
        t2: f64,
    ) -> Result<(), TestCaseError> {
        let space = LabelSpace::categorical(NLI_LABELS).unwrap();
        let features = FeatureConfig { hash_dim: 64, pair_mode: PairMode::ConcatNovelty, ..Default::default() };
        let model = init_params(&space, &features, model_seed, InitScheme::Random { scale: 1.0 }).unwrap();
        let name = NLI_LABELS[label];
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };

        let low = filter_candidates(&model, premise, "s", candidates, name, lo).unwrap();
        let high = filter_candidates(&model, premise, "s", candidates, name, hi).unwrap();

        let hyps = |v: &[AugmentedExample]| v.iter().map(|a| a.hypothesis.clone()).collect::<Vec<_>>();
        let kept_low = hyps(&low);
        let kept_high = hyps(&high);
        let mut it = candidates.iter();
        prop_assert!(kept_low.iter().all(|k| it.any(|c| c == k)));
        let mut it = kept_low.iter();
        prop_assert!(kept_high.iter().all(|k| it.any(|c| c == k)));

        for a in &low {
            prop_assert_eq!(&a.premise, premise);
            prop_assert_eq!(a.label.as_str(), name);
            match predict(&model, &Example::pair("", &a.premise, &a.hypothesis, None)) {
                Prediction::Class { probabilities, label: p, .. } => {
                    prop_assert_eq!(p, label);
                    prop_assert!(probabilities[label] > lo);
                    prop_assert_eq!(a.filter_confidence, Some(probabilities[label]));
                }
                Prediction::Value(_) => prop_assert!(false),
            }
        }
        Ok(())
    }
}
