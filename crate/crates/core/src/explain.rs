//! Abductive (AXp) and contrastive (CXp) explanations, optionally
//! restricted to an l_p ball around the instance.
//!
//! Everything is phrased through a single adversarial-example oracle: a set
//! `X` of fixed features is a weak AXp iff no adversarial example agrees
//! with the instance on `X`, and `Y` is a weak CXp iff one exists when only
//! `Y` is free. Both predicates are monotone, so minimal sets come from
//! linear deletion scans in ascending feature order.
//!
//! Feature sets are 0-based, sorted `Vec<usize>`; display code adds one.

use std::cell::Cell;
use std::fmt;

use crate::distance::{DistanceSpec, Norm};
use crate::encode::Lit;
use crate::error::{Error, Result};
use crate::model::ExplanationProblem;
use crate::oracle::{Limits, Settings, Solver, Status};
use crate::robustness::{find_aex, AexResult};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExplanationKind {
    Axp,
    Cxp,
}

impl fmt::Display for ExplanationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExplanationKind::Axp => "AXp",
            ExplanationKind::Cxp => "CXp",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation<S> {
    pub kind: ExplanationKind,
    pub features: Vec<usize>,
    pub spec: DistanceSpec<S>,
    /// Oracle calls spent producing this explanation.
    pub oracle_calls: u64,
}

impl<S: Scalar> fmt::Display for Explanation<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} ({}, {} oracle calls)",
            self.kind,
            one_based(&self.features),
            self.spec,
            self.oracle_calls
        )
    }
}

/// `{1,3}` style rendering of a 0-based feature set.
pub fn one_based(features: &[usize]) -> String {
    let items: Vec<String> = features.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", items.join(","))
}

/// Collections of AXps and CXps. When `complete`, every explanation of
/// the problem is present.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExplanationListing {
    pub axps: Vec<Vec<usize>>,
    pub cxps: Vec<Vec<usize>>,
    pub complete: bool,
    pub oracle_calls: u64,
}

fn canonical(mut sets: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for s in &mut sets {
        s.sort_unstable();
        s.dedup();
    }
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    sets.dedup();
    sets
}

impl ExplanationListing {
    /// Builds a listing in canonical order: by size, then lexicographically.
    pub fn new(axps: Vec<Vec<usize>>, cxps: Vec<Vec<usize>>, complete: bool) -> Self {
        ExplanationListing {
            axps: canonical(axps),
            cxps: canonical(cxps),
            complete,
            oracle_calls: 0,
        }
    }
}

/// Adversarial-example oracle bound to one problem and ball, counting
/// calls.
pub struct AexOracle<'p, 'a, S> {
    problem: &'p ExplanationProblem<'a, S>,
    spec: DistanceSpec<S>,
    settings: &'p Settings,
    calls: Cell<u64>,
}

impl<'p, 'a, S: Scalar> AexOracle<'p, 'a, S> {
    pub fn new(problem: &'p ExplanationProblem<'a, S>, spec: DistanceSpec<S>, settings: &'p Settings) -> Self {
        AexOracle {
            problem,
            spec,
            settings,
            calls: Cell::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.get()
    }

    pub fn spec(&self) -> &DistanceSpec<S> {
        &self.spec
    }

    fn dim(&self) -> usize {
        self.problem.dim()
    }

    /// Adversarial example agreeing with the instance on `fixed`.
    pub fn query(&self, fixed: &[usize]) -> Result<Option<Vec<S>>> {
        self.calls.set(self.calls.get() + 1);
        match find_aex(self.problem, &self.spec, fixed, self.settings)? {
            AexResult::Found(x) => Ok(Some(x)),
            AexResult::None => Ok(None),
            AexResult::Unknown(why) => Err(Error::Undecided(why)),
        }
    }

    pub fn is_weak_axp(&self, x: &[usize]) -> Result<bool> {
        Ok(self.query(x)?.is_none())
    }

    pub fn is_weak_cxp(&self, y: &[usize]) -> Result<bool> {
        Ok(self.query(&complement(y, self.dim()))?.is_some())
    }

    fn check_features(&self, set: &[usize]) -> Result<()> {
        match set.iter().find(|&&i| i >= self.dim()) {
            Some(i) => Err(Error::Precondition(format!(
                "feature {} outside 1..={}",
                i + 1,
                self.dim()
            ))),
            None => Ok(()),
        }
    }

    /// Deletion-based AXp inside `r`, which must be a weak AXp.
    pub fn find_axp(&self, r: &[usize]) -> Result<Vec<usize>> {
        self.check_features(r)?;
        let mut s = sorted(r);
        if !self.is_weak_axp(&s)? {
            return Err(Error::Precondition(format!(
                "{} is not a weak AXp: an adversarial example exists with it fixed",
                one_based(&s)
            )));
        }
        for i in sorted(r) {
            let without: Vec<usize> = s.iter().copied().filter(|&j| j != i).collect();
            if self.is_weak_axp(&without)? {
                s = without;
            }
        }
        Ok(s)
    }

    /// Deletion-based CXp inside `r`, which must be a weak CXp.
    pub fn find_cxp(&self, r: &[usize]) -> Result<Vec<usize>> {
        self.check_features(r)?;
        let mut y = sorted(r);
        if !self.is_weak_cxp(&y)? {
            return Err(Error::Precondition(format!(
                "{} is not a weak CXp: no adversarial example exists with only it free",
                one_based(&y)
            )));
        }
        for i in sorted(r) {
            let without: Vec<usize> = y.iter().copied().filter(|&j| j != i).collect();
            if self.is_weak_cxp(&without)? {
                y = without;
            }
        }
        Ok(y)
    }
}

fn sorted(set: &[usize]) -> Vec<usize> {
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    s
}

fn complement(set: &[usize], m: usize) -> Vec<usize> {
    (0..m).filter(|i| !set.contains(i)).collect()
}

pub fn is_weak_axp<S: Scalar>(
    problem: &ExplanationProblem<'_, S>,
    x: &[usize],
    spec: &DistanceSpec<S>,
    settings: &Settings,
) -> Result<bool> {
    AexOracle::new(problem, spec.clone(), settings).is_weak_axp(x)
}

fn explanation<S: Scalar>(
    problem: &ExplanationProblem<'_, S>,
    spec: &DistanceSpec<S>,
    r: &[usize],
    kind: ExplanationKind,
    settings: &Settings,
) -> Result<Explanation<S>> {
    let oracle = AexOracle::new(problem, spec.clone(), settings);
    let features = match kind {
        ExplanationKind::Axp => oracle.find_axp(r)?,
        ExplanationKind::Cxp => oracle.find_cxp(r)?,
    };
    Ok(Explanation {
        kind,
        features,
        spec: spec.clone(),
        oracle_calls: oracle.calls(),
    })
}

/// One AXp contained in `r` (pass every feature for an unrestricted one).
pub fn find_axp<S: Scalar>(
    problem: &ExplanationProblem<'_, S>,
    spec: &DistanceSpec<S>,
    r: &[usize],
    settings: &Settings,
) -> Result<Explanation<S>> {
    explanation(problem, spec, r, ExplanationKind::Axp, settings)
}

/// One CXp contained in `r`.
pub fn find_cxp<S: Scalar>(
    problem: &ExplanationProblem<'_, S>,
    spec: &DistanceSpec<S>,
    r: &[usize],
    settings: &Settings,
) -> Result<Explanation<S>> {
    explanation(problem, spec, r, ExplanationKind::Cxp, settings)
}

/// Unrestricted explanation: Hamming distance with every feature allowed
/// to change.
pub fn plain_explanation<S: Scalar>(
    problem: &ExplanationProblem<'_, S>,
    kind: ExplanationKind,
    settings: &Settings,
) -> Result<Explanation<S>> {
    let m = problem.dim();
    let spec = DistanceSpec::new(Norm::L0, S::from_usize(m).expect("feature count fits the scalar"))?;
    let all: Vec<usize> = (0..m).collect();
    explanation(problem, &spec, &all, kind, settings)
}

/// Enumerates AXps and CXps with a MARCO-style loop.
///
/// A map solver over one selector per feature (true = fixed) proposes
/// maximal unexplored seeds. A seed that is a weak AXp shrinks to an AXp,
/// whose supersets are then blocked; otherwise its complement is a weak
/// CXp and shrinks to a CXp, whose disjoint seeds are blocked. The loop
/// stops when the map is exhausted (`complete`) or after `limit`
/// explanations. An undecided oracle call ends the loop early with a
/// partial listing.
pub fn enumerate_explanations<S: Scalar>(
    problem: &ExplanationProblem<'_, S>,
    spec: &DistanceSpec<S>,
    limit: Option<usize>,
    settings: &Settings,
) -> Result<ExplanationListing> {
    if limit == Some(0) {
        return Err(Error::Precondition("the enumeration limit must be at least 1".into()));
    }
    let m = problem.dim();
    let oracle = AexOracle::new(problem, spec.clone(), settings);
    let mut map = Solver::new();
    map.reserve_vars(m as u32);
    let sel = |i: usize| Lit::pos(i as u32 + 1);
    let mut blocks: Vec<Vec<Lit>> = Vec::new();
    let mut axps = Vec::new();
    let mut cxps = Vec::new();
    let mut complete = false;
    let mut open = true;
    loop {
        if limit.is_some_and(|l| axps.len() + cxps.len() >= l) {
            // the listing may still be complete if nothing is left to explore
            complete = !open || map.solve(Limits::default()) == Status::Unsat;
            break;
        }
        if !open || map.solve(Limits::default()) != Status::Sat {
            complete = true;
            break;
        }
        let mut chosen: Vec<bool> = (0..m).map(|i| map.value_of(sel(i))).collect();
        // grow to a maximal seed; only AXp blocks (negative clauses) can break
        for i in 0..m {
            if !chosen[i] {
                chosen[i] = true;
                let ok = blocks
                    .iter()
                    .all(|c| c.iter().any(|l| chosen[l.var() as usize - 1] == l.is_positive()));
                chosen[i] = ok;
            }
        }
        let seed: Vec<usize> = (0..m).filter(|&i| chosen[i]).collect();
        let step = match oracle.is_weak_axp(&seed) {
            Ok(true) => oracle.find_axp(&seed).map(|s| {
                let block: Vec<Lit> = s.iter().map(|&i| !sel(i)).collect();
                axps.push(s);
                block
            }),
            Ok(false) => oracle.find_cxp(&complement(&seed, m)).map(|y| {
                let block: Vec<Lit> = y.iter().map(|&i| sel(i)).collect();
                cxps.push(y);
                block
            }),
            Err(e) => Err(e),
        };
        let block = match step {
            Ok(b) => b,
            Err(Error::Undecided(_)) => break,
            Err(e) => return Err(e),
        };
        open = !block.is_empty() && map.add_clause(&block);
        blocks.push(block);
    }
    let mut listing = ExplanationListing::new(axps, cxps, complete);
    listing.oracle_calls = oracle.calls();
    Ok(listing)
}

/// Features on which an adversarial example differs from the instance.
pub fn cxp_from_aex<S: Scalar>(v: &[S], aex: &[S]) -> Result<Vec<usize>> {
    if v.len() != aex.len() {
        return Err(Error::Dimension {
            expected: v.len(),
            actual: aex.len(),
        });
    }
    let changed: Vec<usize> = (0..v.len()).filter(|&i| !aex[i].eq_tol(&v[i])).collect();
    if changed.is_empty() {
        return Err(Error::EmptyChange);
    }
    Ok(changed)
}

fn hits(set: &[usize], family: &[Vec<usize>]) -> bool {
    family.iter().all(|f| f.iter().any(|i| set.contains(i)))
}

fn is_minimal_hitting_set(set: &[usize], family: &[Vec<usize>]) -> bool {
    hits(set, family)
        && set.iter().all(|&i| {
            let without: Vec<usize> = set.iter().copied().filter(|&j| j != i).collect();
            !hits(&without, family)
        })
}

/// Checks that each AXp is a minimal hitting set of the CXps and vice
/// versa.
pub fn check_mhs_duality(listing: &ExplanationListing) -> Result<bool> {
    if !listing.complete {
        return Err(Error::NotApplicable("duality only holds for complete listings".into()));
    }
    Ok(listing.axps.iter().all(|a| is_minimal_hitting_set(a, &listing.cxps))
        && listing.cxps.iter().all(|c| is_minimal_hitting_set(c, &listing.axps)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brute::{brute_enumerate_explanations, DEFAULT_CAP};
    use crate::model::fixtures::{build_kappa1, build_kappa2};
    use crate::model::{Body, Classifier, Domain, FeatureSpace, Lookup};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn settings() -> Settings {
        Settings::default()
    }

    fn linf(e: f64) -> DistanceSpec<f64> {
        DistanceSpec::new(Norm::LInf, e).unwrap()
    }

    #[test]
    fn kappa2_example_five() {
        let k2 = build_kappa2::<f64>();
        let e = ExplanationProblem::predicted(&k2, vec![0.0, 1.0]).unwrap();
        let s = settings();
        assert!(is_weak_axp(&e, &[], &linf(0.5), &s).unwrap());
        assert!(!is_weak_axp(&e, &[], &linf(0.7), &s).unwrap());
        assert!(is_weak_axp(&e, &[0, 1], &linf(0.7), &s).unwrap());
        assert_eq!(find_axp(&e, &linf(0.7), &[0, 1], &s).unwrap().features, vec![0]);
        assert_eq!(
            find_axp(&e, &linf(0.5), &[0, 1], &s).unwrap().features,
            Vec::<usize>::new()
        );
        assert_eq!(find_cxp(&e, &linf(0.7), &[0, 1], &s).unwrap().features, vec![0]);
        let l = enumerate_explanations(&e, &linf(0.7), None, &s).unwrap();
        assert_eq!(
            (l.axps.clone(), l.cxps.clone(), l.complete),
            (vec![vec![0]], vec![vec![0]], true)
        );
        let l = enumerate_explanations(&e, &linf(0.5), None, &s).unwrap();
        assert_eq!((l.axps, l.cxps, l.complete), (vec![vec![]], vec![], true));
    }

    #[test]
    fn plain_explanations_of_kappa2() {
        let k2 = build_kappa2::<f64>();
        let e = ExplanationProblem::predicted(&k2, vec![0.0, 1.0]).unwrap();
        let s = settings();
        assert_eq!(
            plain_explanation(&e, ExplanationKind::Axp, &s).unwrap().features,
            vec![0]
        );
        assert_eq!(
            plain_explanation(&e, ExplanationKind::Cxp, &s).unwrap().features,
            vec![0]
        );
        let k1 = build_kappa1::<f64>();
        let e = ExplanationProblem::predicted(&k1, vec![0.7]).unwrap();
        assert_eq!(
            plain_explanation(&e, ExplanationKind::Axp, &s).unwrap().features,
            vec![0]
        );
    }

    #[test]
    fn cxp_without_aex_is_rejected() {
        let k1 = build_kappa1::<f64>();
        let e = ExplanationProblem::predicted(&k1, vec![0.7]).unwrap();
        assert!(matches!(
            find_cxp(&e, &linf(0.005), &[0], &settings()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn change_sets() {
        assert_eq!(cxp_from_aex(&[0.0, 1.0], &[0.7, 1.0]).unwrap(), vec![0]);
        assert_eq!(cxp_from_aex(&[0.0, 0.0, 0.0], &[1.0, 0.0, 1.0]).unwrap(), vec![0, 2]);
        assert!(matches!(cxp_from_aex(&[1.0], &[1.0]), Err(Error::EmptyChange)));
    }

    #[test]
    fn duality_examples() {
        assert!(check_mhs_duality(&ExplanationListing::new(vec![vec![0]], vec![vec![0]], true)).unwrap());
        assert!(!check_mhs_duality(&ExplanationListing::new(vec![vec![0, 1]], vec![vec![0]], true)).unwrap());
        assert!(matches!(
            check_mhs_duality(&ExplanationListing::new(vec![], vec![], false)),
            Err(Error::NotApplicable(_))
        ));
    }

    fn random_lookup(m: usize, seed: u64) -> Classifier<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = FeatureSpace::new(vec![Domain::Binary; m]).unwrap();
        let entries = (0..1u32 << m)
            .map(|p| ((0..m).map(|i| f64::from(p >> i & 1)).collect(), rng.gen_range(0..2)))
            .collect();
        let t = Lookup::new(&space, entries, 0).unwrap();
        Classifier::with_class_count(space, 2, Body::Lookup(t)).unwrap()
    }

    #[test]
    fn enumeration_matches_subset_lattice() {
        for seed in 0..12 {
            let clf = random_lookup(4, seed);
            let v: Vec<f64> = (0..4).map(|i| f64::from((seed as u32 >> i) & 1)).collect();
            let e = ExplanationProblem::predicted(&clf, v).unwrap();
            for eps in [1.0, 2.0, 4.0] {
                let spec = DistanceSpec::new(Norm::L0, eps).unwrap();
                let got = enumerate_explanations(&e, &spec, None, &settings()).unwrap();
                let want = brute_enumerate_explanations(&e, &spec, DEFAULT_CAP).unwrap();
                assert_eq!(
                    (&got.axps, &got.cxps),
                    (&want.axps, &want.cxps),
                    "seed {seed} eps {eps}"
                );
                assert!(got.complete);
                assert!(check_mhs_duality(&got).unwrap());
            }
        }
    }

    #[test]
    fn limit_gives_partial_listing() {
        let clf = random_lookup(4, 3);
        let e = ExplanationProblem::predicted(&clf, vec![0.0; 4]).unwrap();
        let spec = DistanceSpec::new(Norm::L0, 4.0).unwrap();
        let full = enumerate_explanations(&e, &spec, None, &settings()).unwrap();
        let total = full.axps.len() + full.cxps.len();
        if total > 1 {
            let part = enumerate_explanations(&e, &spec, Some(1), &settings()).unwrap();
            assert_eq!(part.axps.len() + part.cxps.len(), 1);
            assert!(!part.complete);
        }
        assert!(enumerate_explanations(&e, &spec, Some(0), &settings()).is_err());
    }
}
