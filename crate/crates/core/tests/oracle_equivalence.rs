//! The solver-backed adversarial-example oracle against exhaustive search.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robex::brute::{brute_find_aex, DEFAULT_CAP};
use robex::model::generate::{random_bnn, random_lookup, BnnShape};
use robex::{find_aex, within_ball, AexResult, Classifier, DistanceSpec, ExplanationProblem, Norm, Settings};

fn random_model(rng: &mut ChaCha8Rng, seed: u64) -> Classifier<f64> {
    if rng.gen_bool(0.5) {
        let m = rng.gen_range(2..=12);
        random_lookup(m, rng.gen_range(2..=3), seed).unwrap()
    } else {
        let shape = BnnShape {
            inputs: rng.gen_range(4..=12),
            hidden: (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(2..=8)).collect(),
            classes: 2,
        };
        random_bnn(&shape, seed).unwrap()
    }
}

fn random_spec(rng: &mut ChaCha8Rng, m: usize) -> DistanceSpec<f64> {
    match rng.gen_range(0..4) {
        0 => DistanceSpec::new(Norm::L0, rng.gen_range(1..=m) as f64),
        1 => DistanceSpec::new(Norm::LInf, *[0.5, 1.0].choose(rng).unwrap()),
        2 => DistanceSpec::new(Norm::L1, rng.gen_range(1..=m) as f64),
        _ => DistanceSpec::new(Norm::L2, (rng.gen_range(1..=m) as f64).sqrt()),
    }
    .unwrap()
}

#[test]
fn embedded_oracle_matches_exhaustive_search() {
    let settings = Settings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut found = 0;
    for q in 0..500u64 {
        let clf = random_model(&mut rng, q);
        let m = clf.dim();
        let v: Vec<f64> = (0..m).map(|_| rng.gen_range(0..=1) as f64).collect();
        let problem = ExplanationProblem::predicted(&clf, v.clone()).unwrap();
        let spec = random_spec(&mut rng, m);
        let fixed: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.3)).collect();
        let expected = brute_find_aex(&problem, &spec, &fixed, DEFAULT_CAP).unwrap();
        match find_aex(&problem, &spec, &fixed, &settings).unwrap() {
            AexResult::Found(x) => {
                assert!(
                    expected.is_some(),
                    "query {q}: solver found {x:?}, brute force found nothing"
                );
                assert!(within_ball(&x, &v, &spec).unwrap());
                assert!(fixed.iter().all(|&i| x[i] == v[i]));
                assert_ne!(clf.evaluate(&x).unwrap(), problem.label());
                found += 1;
            }
            AexResult::None => assert!(expected.is_none(), "query {q}: brute force found {expected:?}"),
            AexResult::Unknown(w) => panic!("query {q}: undecided without a budget: {w}"),
        }
    }
    // both verdicts must be exercised
    assert!(
        found > 50 && found < 450,
        "{found} of 500 queries had an adversarial example"
    );
}
