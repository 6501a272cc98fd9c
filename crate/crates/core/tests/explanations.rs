//! Explanation enumeration against the subset lattice, hitting-set duality
//! and the change-set round trip between adversarial examples and CXps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robex::brute::{brute_enumerate_explanations, DEFAULT_CAP};
use robex::explain::AexOracle;
use robex::model::generate::{random_bnn, random_lookup, BnnShape};
use robex::{
    check_mhs_duality, cxp_from_aex, enumerate_explanations, find_aex, AexResult, Classifier, DistanceSpec,
    ExplanationProblem, Norm, Settings,
};

fn instances() -> Vec<(Classifier<f64>, Vec<f64>, DistanceSpec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    (0..50u64)
        .map(|k| {
            let m = rng.gen_range(2..=8);
            let clf = if k % 2 == 0 {
                random_lookup(m, 2, k).unwrap()
            } else {
                let shape = BnnShape {
                    inputs: m,
                    hidden: vec![rng.gen_range(3..=6)],
                    classes: 2,
                };
                random_bnn(&shape, k).unwrap()
            };
            let v = (0..m).map(|_| rng.gen_range(0..=1) as f64).collect();
            let spec = DistanceSpec::new(Norm::L0, rng.gen_range(1..=m) as f64).unwrap();
            (clf, v, spec)
        })
        .collect()
}

#[test]
fn enumeration_is_complete_dual_and_round_trips() {
    let settings = Settings::default();
    let mut cxps_checked = 0;
    for (k, (clf, v, spec)) in instances().iter().enumerate() {
        let problem = ExplanationProblem::predicted(clf, v.clone()).unwrap();
        let listing = enumerate_explanations(&problem, spec, None, &settings).unwrap();
        let brute = brute_enumerate_explanations(&problem, spec, DEFAULT_CAP).unwrap();
        assert!(listing.complete, "instance {k}");
        assert_eq!(listing.axps, brute.axps, "instance {k}: AXps");
        assert_eq!(listing.cxps, brute.cxps, "instance {k}: CXps");
        assert!(check_mhs_duality(&listing).unwrap(), "instance {k}: duality");

        let oracle = AexOracle::new(&problem, spec.clone(), &settings);
        for y in &listing.cxps {
            let fixed: Vec<usize> = (0..clf.dim()).filter(|i| !y.contains(i)).collect();
            let AexResult::Found(x) = find_aex(&problem, spec, &fixed, &settings).unwrap() else {
                panic!("instance {k}: CXp {y:?} admits no adversarial example");
            };
            let changed = cxp_from_aex(v, &x).unwrap();
            assert!(
                changed.iter().all(|i| y.contains(i)),
                "instance {k}: {changed:?} not inside {y:?}"
            );
            assert!(
                oracle.is_weak_cxp(&changed).unwrap(),
                "instance {k}: {changed:?} is not a weak CXp"
            );
            cxps_checked += 1;
        }
    }
    assert!(cxps_checked > 20);
}
