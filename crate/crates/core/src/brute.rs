//! Exhaustive reference oracles for small discrete spaces.
//!
//! Nothing here shares code with the encoder or the solver; results are
//! obtained by evaluating the classifier on every point.

use crate::distance::{within_ball, DistanceSpec};
use crate::error::{Error, Result};
use crate::explain::ExplanationListing;
use crate::model::{ClassLabel, Classifier, ExplanationProblem, FeatureSpace};
use crate::scalar::Scalar;

pub const DEFAULT_CAP: u128 = 1 << 20;
pub const MAX_SUBSET_FEATURES: usize = 16;

/// Finite iteration over an all-discrete space in lexicographic level
/// order (last feature fastest).
pub struct EnumerableSpace<'a, S> {
    space: &'a FeatureSpace<S>,
    levels: Vec<u64>,
    size: u128,
}

impl<'a, S: Scalar> EnumerableSpace<'a, S> {
    pub fn new(space: &'a FeatureSpace<S>, cap: u128) -> Result<Self> {
        let size = space.size().ok_or_else(|| {
            Error::NotApplicable("exhaustive search needs discrete features; quantize real intervals first".into())
        })?;
        if size > cap {
            return Err(Error::TooLarge(format!("{size} points exceed the cap of {cap}")));
        }
        let levels = space.domains().iter().map(|d| d.levels().unwrap()).collect();
        Ok(EnumerableSpace { space, levels, size })
    }

    pub fn size(&self) -> u128 {
        self.size
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<S>> + '_ {
        let mut cur: Option<Vec<u64>> = Some(vec![0; self.levels.len()]);
        std::iter::from_fn(move || {
            let out = cur.clone()?;
            let mut next = out.clone();
            let mut i = next.len();
            loop {
                if i == 0 {
                    cur = None;
                    break;
                }
                i -= 1;
                next[i] += 1;
                if next[i] < self.levels[i] {
                    cur = Some(next);
                    break;
                }
                next[i] = 0;
            }
            Some(self.space.point_at(&out))
        })
    }
}

fn agrees_on<S: Scalar>(x: &[S], v: &[S], features: &[usize]) -> bool {
    features.iter().all(|&i| x[i].eq_tol(&v[i]))
}

/// First point (in enumeration order) of the ball that agrees with `v` on
/// `fixed` and is not classified like `v`.
pub fn brute_find_aex<S: Scalar>(
    problem: &ExplanationProblem<'_, S>,
    spec: &DistanceSpec<S>,
    fixed: &[usize],
    cap: u128,
) -> Result<Option<Vec<S>>> {
    let clf = problem.classifier();
    let v = problem.point();
    let label = problem.label();
    for x in EnumerableSpace::new(clf.space(), cap)?.points() {
        if agrees_on(&x, v, fixed) && within_ball(&x, v, spec)? && clf.evaluate(&x)? != label {
            return Ok(Some(x));
        }
    }
    Ok(None)
}

/// Pair of points within `spec` of each other with different non-abstain
/// labels, by exhaustive search over all pairs.
pub fn brute_global<S: Scalar>(
    classifier: &Classifier<S>,
    spec: &DistanceSpec<S>,
    cap: u128,
) -> Result<Option<(Vec<S>, Vec<S>)>> {
    let es = EnumerableSpace::new(classifier.space(), cap)?;
    if es.size().saturating_mul(es.size()) > cap.saturating_mul(64) {
        return Err(Error::TooLarge(format!(
            "{} points are too many for a pairwise scan",
            es.size()
        )));
    }
    let labelled: Vec<(Vec<S>, ClassLabel)> = es
        .points()
        .map(|p| {
            let l = classifier.evaluate(&p)?;
            Ok((p, l))
        })
        .collect::<Result<_>>()?;
    for (v, lv) in &labelled {
        for (x, lx) in &labelled {
            if lv != lx && lv.index().is_some() && lx.index().is_some() && within_ball(x, v, spec)? {
                return Ok(Some((v.clone(), x.clone())));
            }
        }
    }
    Ok(None)
}

/// Every AXp and CXp of `problem`, from the full subset lattice.
pub fn brute_enumerate_explanations<S: Scalar>(
    problem: &ExplanationProblem<'_, S>,
    spec: &DistanceSpec<S>,
    cap: u128,
) -> Result<ExplanationListing> {
    let m = problem.dim();
    if m > MAX_SUBSET_FEATURES {
        return Err(Error::TooLarge(format!(
            "{m} features exceed the {MAX_SUBSET_FEATURES}-feature subset lattice limit"
        )));
    }
    let clf = problem.classifier();
    let v = problem.point();
    let label = problem.label();
    let full = (1usize << m) - 1;
    // has[mask]: some adversarial point agrees with v on every feature of mask
    let mut has = vec![false; 1 << m];
    for x in EnumerableSpace::new(clf.space(), cap)?.points() {
        if within_ball(&x, v, spec)? && clf.evaluate(&x)? != label {
            let agree = (0..m).filter(|&i| x[i].eq_tol(&v[i])).fold(0usize, |a, i| a | 1 << i);
            has[agree] = true;
        }
    }
    // propagate to subsets: has[mask] |= has[mask ∪ {i}]
    for i in 0..m {
        for mask in (0..=full).rev() {
            if mask & (1 << i) == 0 && has[mask | 1 << i] {
                has[mask] = true;
            }
        }
    }
    let weak_axp = |x: usize| !has[x];
    let weak_cxp = |y: usize| has[full & !y];
    let to_set = |mask: usize| (0..m).filter(|&i| mask & (1 << i) != 0).collect::<Vec<_>>();
    let mut axps = Vec::new();
    let mut cxps = Vec::new();
    for mask in 0..=full {
        let bits = to_set(mask);
        if weak_axp(mask) && bits.iter().all(|&i| !weak_axp(mask & !(1 << i))) {
            axps.push(bits.clone());
        }
        if weak_cxp(mask) && bits.iter().all(|&i| !weak_cxp(mask & !(1 << i))) {
            cxps.push(bits);
        }
    }
    Ok(ExplanationListing::new(axps, cxps, true))
}
