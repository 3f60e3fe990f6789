//! Task augmentation: overgenerate auxiliary-task (NLI) examples from
//! target-domain text, filter them with an auxiliary classifier, and
//! fine-tune a base model on the result.

mod filter;
mod finetune;
mod generator;
mod text2text;

pub use filter::{
    build_ta_dataset, filter_candidates, score_pool, select_tau, tau_dev_score, validate_grid,
    AugmentedExample, ScoredCandidate, ScoredPool, SyntheticSet, TauEvaluation, TauSelection,
};
pub use finetune::{
    default_carry, intermediate_finetune, intermediate_train, run_task_augmentation, TAConfig,
    TaOutcome,
};
pub use generator::{
    generate_candidates, CandidateGenerator, Generator, GeneratorKind, GeneratorSpec, RuleTables,
    NLI_LABELS,
};
pub use text2text::{reversed_label, to_text2text, Text2TextPair, REVERSE_ENTAILMENT};
