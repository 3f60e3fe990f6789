mod common;

use proptest::prelude::*;
use semisup::augmentation::select_tau;

use common::filtering;
use common::tau::{exhaustive, noisy_fixture};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn filtering_is_a_monotone_verified_subset(
        model_seed in any::<u64>(),
        premise in filtering::sentence(),
        candidates in prop::collection::vec(filtering::sentence(), 0..12),
        label in 0usize..3,
        t1 in 0.0..1.0f64,
        t2 in 0.0..1.0f64,
    ) {
        filtering::check_case(model_seed, &premise, &candidates, label, t1, t2)?;
    }
}

#[test]
fn noisy_generator_tau_selection_matches_exhaustive_search() {
    let f = noisy_fixture(5);
    let chosen = select_tau(&f.classifier, &f.scored, &f.aux_dev, &f.grid, &f.budget).unwrap();
    assert!(f.grid.contains(&chosen.tau));

    let table = exhaustive(&f);
    let best = table.iter().filter_map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
    let argmax = table.iter().find(|(_, s)| *s == Some(best)).unwrap().0;
    assert_eq!(chosen.tau, argmax, "grid table {table:?}");
    for (e, (tau, score)) in chosen.evaluations.iter().zip(&table) {
        assert_eq!((e.tau, e.dev_score), (*tau, *score));
    }
    // Frozen from the exhaustive table on this fixture.
    assert_eq!(chosen.tau, 0.5, "grid table {table:?}");

    let again = select_tau(&f.classifier, &f.scored, &f.aux_dev, &f.grid, &f.budget).unwrap();
    assert_eq!(again, chosen);
}
