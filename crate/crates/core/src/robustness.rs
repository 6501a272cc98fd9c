//! Local and global robustness queries.
//!
//! `find_aex` is the single adversarial-example oracle. It routes each
//! query to one of three complete procedures:
//!
//! * discrete spaces with l0 / l∞ balls: pseudo-Boolean encoding and SAT,
//! * real-interval spaces with piecewise-linear models and l0 / l1 / l∞
//!   balls: exact polyhedral search,
//! * small discrete spaces with l1 / l2 balls: exhaustive enumeration.
//!
//! Every witness is checked by forward evaluation before it is returned.

use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brute;
use crate::distance::{distance, minimum_meaningful_epsilon, within_ball, DistanceSpec, Norm};
use crate::encode::{decode, global_query, linf_steps, local_query, CopyTag, FeatureInterval, Formula};
use crate::error::{Error, Result};
use crate::model::{Body, ClassLabel, Classifier, Domain, ExplanationProblem, FeatureSpace};
use crate::oracle::{Settings, SolveResult};
use crate::polyhedral::{self, Pick, Region};
use crate::scalar::Scalar;

/// Conjunction of per-feature closed intervals (equalities are intervals
/// with equal ends).
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet<S> {
    pub intervals: Vec<FeatureInterval<S>>,
}

impl<S: Scalar> Default for ConstraintSet<S> {
    fn default() -> Self {
        ConstraintSet { intervals: Vec::new() }
    }
}

impl<S: Scalar> ConstraintSet<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn at_least(mut self, feature: usize, lo: S) -> Self {
        self.intervals.push(FeatureInterval {
            feature,
            lo: Some(lo),
            hi: None,
        });
        self
    }

    pub fn at_most(mut self, feature: usize, hi: S) -> Self {
        self.intervals.push(FeatureInterval {
            feature,
            lo: None,
            hi: Some(hi),
        });
        self
    }

    pub fn equal(mut self, feature: usize, value: S) -> Self {
        self.intervals.push(FeatureInterval {
            feature,
            lo: Some(value.clone()),
            hi: Some(value),
        });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn holds(&self, x: &[S]) -> bool {
        self.intervals.iter().all(|iv| {
            let v = &x[iv.feature];
            iv.lo.as_ref().is_none_or(|lo| lo.le_tol(v)) && iv.hi.as_ref().is_none_or(|hi| v.le_tol(hi))
        })
    }

    /// Checks that some point of the space satisfies every interval.
    pub fn check(&self, space: &FeatureSpace<S>) -> Result<()> {
        for f in 0..space.dim() {
            let mine: Vec<&FeatureInterval<S>> = self.intervals.iter().filter(|iv| iv.feature == f).collect();
            if mine.is_empty() {
                continue;
            }
            let inside = |v: &S| {
                mine.iter().all(|iv| {
                    iv.lo.as_ref().is_none_or(|lo| lo.le_tol(v)) && iv.hi.as_ref().is_none_or(|hi| v.le_tol(hi))
                })
            };
            let d = space.domain(f);
            let ok = match d {
                Domain::Real { lo, hi } => {
                    let mut a = lo.clone();
                    let mut b = hi.clone();
                    for iv in &mine {
                        if let Some(l) = &iv.lo {
                            if l > &a {
                                a = l.clone();
                            }
                        }
                        if let Some(h) = &iv.hi {
                            if h < &b {
                                b = h.clone();
                            }
                        }
                    }
                    a.le_tol(&b)
                }
                _ => {
                    let n = d.levels().unwrap();
                    n <= 1 << 16 && (0..n).any(|l| inside(&d.value_at(l))) || n > 1 << 16
                }
            };
            if !ok {
                return Err(Error::Precondition(format!(
                    "constraints on feature {} are unsatisfiable",
                    f + 1
                )));
            }
        }
        Ok(())
    }

    fn triples(&self) -> Vec<(usize, Option<S>, Option<S>)> {
        self.intervals
            .iter()
            .map(|iv| (iv.feature, iv.lo.clone(), iv.hi.clone()))
            .collect()
    }
}

/// Outcome of one adversarial-example query.
#[derive(Debug, Clone, PartialEq)]
pub enum AexResult<S> {
    Found(Vec<S>),
    /// Verified absence.
    None,
    /// The oracle ran out of resources.
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RobustnessVerdict<S> {
    Robust,
    NotRobust(Vec<S>),
    Unknown(String),
}

/// Which procedure answered a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Sat,
    Polyhedral,
    Exhaustive,
}

fn label_index(label: ClassLabel) -> Result<usize> {
    label
        .index()
        .ok_or_else(|| Error::Precondition("abstaining instances have no class to defend".into()))
}

/// Picks the complete procedure for a query shape.
pub fn route_for<S: Scalar>(classifier: &Classifier<S>, norm: Norm) -> Result<Route> {
    let space = classifier.space();
    if space.is_discrete() {
        return match norm {
            Norm::L0 | Norm::LInf => Ok(Route::Sat),
            Norm::L1 | Norm::L2 => {
                if space.size().is_some_and(|s| s <= brute::DEFAULT_CAP) {
                    Ok(Route::Exhaustive)
                } else {
                    Err(Error::EncodingUnsupported(format!(
                        "{norm} balls over discrete spaces are only decided exhaustively, and this space is too large"
                    )))
                }
            }
        };
    }
    if space.is_continuous() && classifier.body().is_piecewise_linear() {
        return match norm {
            Norm::L2 => Err(Error::EncodingUnsupported(
                "l2 balls over real features are not supported; use l0, l1 or linf, or quantize".into(),
            )),
            _ => Ok(Route::Polyhedral),
        };
    }
    Err(Error::EncodingUnsupported(format!(
        "a {} model over {} features has no complete procedure; quantize the real features",
        classifier.body().kind_name(),
        if space.is_continuous() {
            "real"
        } else {
            "mixed real and discrete"
        }
    )))
}

/// Checks an adversarial example: in the space, in the ball, agreeing on
/// `fixed`, inside `xi`, and classified differently.
pub fn verify_aex<S: Scalar>(
    problem: &ExplanationProblem<'_, S>,
    spec: &DistanceSpec<S>,
    fixed: &[usize],
    xi: Option<&ConstraintSet<S>>,
    x: &[S],
) -> Result<()> {
    let v = problem.point();
    let clf = problem.classifier();
    clf.space()
        .check_point(x)
        .map_err(|e| Error::Verification(e.to_string()))?;
    if !within_ball(x, v, spec)? {
        return Err(Error::Verification(format!("witness lies outside the {spec} ball")));
    }
    if let Some(i) = fixed.iter().find(|&&i| !x[i].eq_tol(&v[i])) {
        return Err(Error::Verification(format!("witness changes fixed feature {}", i + 1)));
    }
    if xi.is_some_and(|c| !c.holds(x)) {
        return Err(Error::Verification("witness violates the input constraints".into()));
    }
    if clf.evaluate(x)? == problem.label() {
        return Err(Error::Verification("witness keeps the original class".into()));
    }
    Ok(())
}

/// FindAEx: a point within `spec` of the instance, agreeing with it on
/// `fixed`, whose class differs. `None` is only returned after a complete
/// search.
pub fn find_aex<S: Scalar>(
    problem: &ExplanationProblem<'_, S>,
    spec: &DistanceSpec<S>,
    fixed: &[usize],
    settings: &Settings,
) -> Result<AexResult<S>> {
    find_aex_constrained(problem, spec, fixed, None, settings)
}

pub fn find_aex_constrained<S: Scalar>(
    problem: &ExplanationProblem<'_, S>,
    spec: &DistanceSpec<S>,
    fixed: &[usize],
    xi: Option<&ConstraintSet<S>>,
    settings: &Settings,
) -> Result<AexResult<S>> {
    let clf = problem.classifier();
    let m = clf.dim();
    if let Some(i) = fixed.iter().find(|&&i| i >= m) {
        return Err(Error::Precondition(format!("feature {} outside 1..={m}", i + 1)));
    }
    let label = label_index(problem.label())?;
    let v = problem.point();
    let result = match route_for(clf, spec.norm)? {
        Route::Sat => {
            let intervals = xi.map(|c| c.intervals.as_slice()).unwrap_or(&[]);
            let f = local_query(clf, v, label, spec, fixed, intervals)?;
            match settings.backend.solve(&f, settings.budget)? {
                SolveResult::Sat(model) => AexResult::Found(decode(&model, &f, clf.space(), CopyTag::X)?),
                SolveResult::Unsat => AexResult::None,
                SolveResult::ResourceOut => AexResult::Unknown("solver budget exhausted".into()),
            }
        }
        Route::Exhaustive => {
            let mut found = None;
            for x in brute::EnumerableSpace::new(clf.space(), brute::DEFAULT_CAP)?.points() {
                if fixed.iter().all(|&i| x[i].eq_tol(&v[i]))
                    && xi.is_none_or(|c| c.holds(&x))
                    && within_ball(&x, v, spec)?
                    && clf.evaluate(&x)? != problem.label()
                {
                    found = Some(x);
                    break;
                }
            }
            found.map_or(AexResult::None, AexResult::Found)
        }
        Route::Polyhedral => {
            let triples = xi.map(ConstraintSet::triples).unwrap_or_default();
            let region = Region {
                space: clf.space(),
                center: v,
                spec,
                fixed,
                intervals: &triples,
            };
            let mut out = AexResult::None;
            for mode in [Pick::Nearest, Pick::Interior] {
                match polyhedral::find_other_class(clf.body(), &region, label, mode) {
                    Ok(None) => break,
                    Ok(Some(z)) => {
                        let x: Vec<S> = z.iter().map(S::from_rational).collect();
                        if verify_aex(problem, spec, fixed, xi, &x).is_ok() {
                            out = AexResult::Found(x);
                            break;
                        }
                        out = AexResult::Unknown(
                            "an adversarial region exists but no witness is representable in this scalar type".into(),
                        );
                    }
                    Err(Error::Undecided(msg)) => {
                        out = AexResult::Unknown(msg);
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            out
        }
    };
    if let AexResult::Found(x) = &result {
        verify_aex(problem, spec, fixed, xi, x)?;
    }
    Ok(result)
}

/// Robust iff no adversarial example exists in the (constrained) ball.
pub fn is_locally_robust<S: Scalar>(
    problem: &ExplanationProblem<'_, S>,
    spec: &DistanceSpec<S>,
    xi: Option<&ConstraintSet<S>>,
    settings: &Settings,
) -> Result<RobustnessVerdict<S>> {
    if spec.epsilon <= S::zero() {
        return Err(Error::Precondition("robustness needs epsilon > 0".into()));
    }
    if let Some(c) = xi {
        c.check(problem.classifier().space())?;
    }
    Ok(match find_aex_constrained(problem, spec, &[], xi, settings)? {
        AexResult::Found(x) => RobustnessVerdict::NotRobust(x),
        AexResult::None => RobustnessVerdict::Robust,
        AexResult::Unknown(why) => RobustnessVerdict::Unknown(why),
    })
}

/// Smallest radius at which an adversarial example appears.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipThreshold<S> {
    pub epsilon: S,
    /// True when computed in closed form rather than bracketed.
    pub exact: bool,
}

/// Local flip threshold of `problem` under `norm`. Linear models over real
/// intervals get the closed form `|w·v - b| / ||w||_*` when the nearest
/// boundary point lies inside the domain; everything else is bracketed by
/// bisection to `tol`.
pub fn local_flip_threshold<S: Scalar>(
    problem: &ExplanationProblem<'_, S>,
    norm: Norm,
    tol: &S,
    settings: &Settings,
) -> Result<FlipThreshold<S>> {
    let clf = problem.classifier();
    if let (Body::Linear { weights, bias }, true) = (clf.body(), clf.space().is_continuous()) {
        if let Some(eps) = linear_flip(clf.space(), weights, bias, problem.point(), norm) {
            return Ok(FlipThreshold {
                epsilon: S::from_rational(&eps),
                exact: true,
            });
        }
    }
    if norm == Norm::L0 {
        for k in 1..=clf.dim() {
            let spec = DistanceSpec::new(Norm::L0, S::from_usize(k).unwrap())?;
            match find_aex(problem, &spec, &[], settings)? {
                AexResult::Found(_) => {
                    return Ok(FlipThreshold {
                        epsilon: spec.epsilon,
                        exact: true,
                    })
                }
                AexResult::None => {}
                AexResult::Unknown(w) => return Err(Error::Undecided(w)),
            }
        }
        return Err(Error::NotApplicable(
            "no adversarial example exists at any radius".into(),
        ));
    }
    let space = clf.space();
    let mut hi = space
        .domains()
        .iter()
        .map(|d| d.upper() - d.lower())
        .fold(S::zero(), |acc, w| acc + w);
    if hi <= S::zero() {
        return Err(Error::NotApplicable("the space has a single point".into()));
    }
    let probe = |eps: &S| -> Result<bool> {
        let spec = DistanceSpec::new(norm, eps.clone())?;
        match find_aex(problem, &spec, &[], settings)? {
            AexResult::Found(_) => Ok(true),
            AexResult::None => Ok(false),
            AexResult::Unknown(w) => Err(Error::Undecided(w)),
        }
    };
    if !probe(&hi)? {
        return Err(Error::NotApplicable(
            "no adversarial example exists at any radius".into(),
        ));
    }
    let mut lo = S::zero();
    let two = S::from_i64_exact(2);
    for _ in 0..200 {
        if hi.clone() - lo.clone() <= *tol {
            break;
        }
        let mid = (lo.clone() + hi.clone()) / two.clone();
        if probe(&mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(FlipThreshold {
        epsilon: hi,
        exact: false,
    })
}

fn linear_flip<S: Scalar>(
    space: &FeatureSpace<S>,
    weights: &[S],
    bias: &S,
    v: &[S],
    norm: Norm,
) -> Option<BigRational> {
    let w: Vec<BigRational> = weights.iter().map(Scalar::to_rational).collect();
    let x: Vec<BigRational> = v.iter().map(Scalar::to_rational).collect();
    let score = w.iter().zip(&x).fold(-bias.to_rational(), |acc, (a, b)| acc + a * b);
    let gap = score.abs();
    // Move along the dual direction; only l∞ and l1 have rational optima.
    let (dual, dir): (BigRational, Vec<BigRational>) = match norm {
        Norm::LInf => (
            w.iter().fold(BigRational::zero(), |acc, a| acc + a.abs()),
            w.iter()
                .map(|a| {
                    if a.is_positive() {
                        BigRational::one()
                    } else if a.is_negative() {
                        -BigRational::one()
                    } else {
                        BigRational::zero()
                    }
                })
                .collect(),
        ),
        Norm::L1 => {
            let (k, best) = w
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().cmp(&b.1.abs()).then(b.0.cmp(&a.0)))?;
            let mut d = vec![BigRational::zero(); w.len()];
            d[k] = best.signum();
            (best.abs(), d)
        }
        _ => return None,
    };
    if dual.is_zero() {
        return None;
    }
    let eps = &gap / &dual;
    // toward the boundary: decrease the score when class 1, else increase
    let sign = if score.is_negative() {
        BigRational::one()
    } else {
        -BigRational::one()
    };
    for (i, d) in space.domains().iter().enumerate() {
        let y = &x[i] + &sign * &eps * &dir[i];
        if y < d.lower().to_rational() || y > d.upper().to_rational() {
            return None;
        }
    }
    Some(eps)
}

/// Where sampled points come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution<S> {
    /// Uniform over the part of the ball inside the feature space.
    Uniform,
    /// Rows of a dataset; rows outside the ball are skipped.
    Empirical(Vec<Vec<S>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig<S> {
    pub distribution: Distribution<S>,
    pub samples: usize,
    /// Target confidence; recorded in reports, not used to size samples.
    pub confidence: f64,
    pub seed: u64,
}

impl<S> SamplingConfig<S> {
    pub fn uniform(samples: usize, seed: u64) -> Self {
        SamplingConfig {
            distribution: Distribution::Uniform,
            samples,
            confidence: 0.95,
            seed,
        }
    }
}

/// Result of sampling. Sampling can find an adversarial example but never
/// establishes robustness.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleVerdict<S> {
    /// `n` sampled points of the ball kept the class.
    NoAExFound(usize),
    AExFound(Vec<S>),
}

/// Smallest level in `0..n` satisfying a monotone predicate, `n` if none.
fn first_level(n: u64, pred: impl Fn(u64) -> bool) -> u64 {
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

fn sample_point<S: Scalar>(space: &FeatureSpace<S>, v: &[S], spec: &DistanceSpec<S>, rng: &mut ChaCha8Rng) -> Vec<S> {
    let m = v.len();
    let uniform_in = |d: &Domain<S>, center: &S, radius: Option<&S>, rng: &mut ChaCha8Rng| -> S {
        match d {
            Domain::Real { lo, hi } => {
                let (mut a, mut b) = (lo.clone(), hi.clone());
                if let Some(r) = radius {
                    let (ca, cb) = (center.clone() - r.clone(), center.clone() + r.clone());
                    if ca > a {
                        a = ca;
                    }
                    if cb < b {
                        b = cb;
                    }
                }
                let t: f64 = rng.gen();
                a.clone() + (b - a) * S::from_f64(t).unwrap()
            }
            Domain::Categorical(_) => {
                let n = d.levels().unwrap();
                let choices: Vec<u64> = match radius {
                    None => (0..n).collect(),
                    Some(r) => (0..n)
                        .filter(|&l| (d.value_at(l) - center.clone()).abs().le_tol(r))
                        .collect(),
                };
                d.value_at(choices[rng.gen_range(0..choices.len())])
            }
            _ => {
                // ordinal levels increase with their value
                let n = d.levels().unwrap();
                let (lo, hi) = match radius {
                    None => (0, n - 1),
                    Some(r) => {
                        let low = center.clone() - r.clone();
                        let high = center.clone() + r.clone();
                        let first = first_level(n, |l| low.le_tol(&d.value_at(l)));
                        let past = first_level(n, |l| !d.value_at(l).le_tol(&high));
                        (first, past.saturating_sub(1).max(first))
                    }
                };
                d.value_at(rng.gen_range(lo..=hi))
            }
        }
    };
    match spec.norm {
        Norm::LInf => (0..m)
            .map(|i| uniform_in(space.domain(i), &v[i], Some(&spec.epsilon), rng))
            .collect(),
        Norm::L0 => {
            let k = spec.l0_budget().min(m);
            let mut idx: Vec<usize> = (0..m).collect();
            for i in 0..k {
                let j = rng.gen_range(i..m);
                idx.swap(i, j);
            }
            let mut x = v.to_vec();
            for &i in &idx[..k] {
                x[i] = uniform_in(space.domain(i), &v[i], None, rng);
            }
            x
        }
        Norm::L1 | Norm::L2 => {
            // rejection from the enclosing box; the center is the fallback
            for _ in 0..1000 {
                let x: Vec<S> = (0..m)
                    .map(|i| uniform_in(space.domain(i), &v[i], Some(&spec.epsilon), rng))
                    .collect();
                if within_ball(&x, v, spec).unwrap_or(false) {
                    return x;
                }
            }
            v.to_vec()
        }
    }
}

/// Naive Monte Carlo search for an adversarial example.
pub fn sample_local_robustness<S: Scalar>(
    problem: &ExplanationProblem<'_, S>,
    spec: &DistanceSpec<S>,
    cfg: &SamplingConfig<S>,
) -> Result<SampleVerdict<S>> {
    if cfg.samples == 0 {
        return Err(Error::Precondition("sampling needs at least one sample".into()));
    }
    let clf = problem.classifier();
    let v = problem.point();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checked = 0;
    match &cfg.distribution {
        Distribution::Uniform => {
            for _ in 0..cfg.samples {
                let x = sample_point(clf.space(), v, spec, &mut rng);
                checked += 1;
                if clf.evaluate(&x)? != problem.label() {
                    return Ok(SampleVerdict::AExFound(x));
                }
            }
        }
        Distribution::Empirical(rows) => {
            if rows.is_empty() {
                return Err(Error::Precondition(
                    "empirical sampling needs a non-empty dataset".into(),
                ));
            }
            for _ in 0..cfg.samples {
                let x = &rows[rng.gen_range(0..rows.len())];
                if !within_ball(x, v, spec)? || !clf.space().contains(x) {
                    continue;
                }
                checked += 1;
                if clf.evaluate(x)? != problem.label() {
                    return Ok(SampleVerdict::AExFound(x.clone()));
                }
            }
        }
    }
    Ok(SampleVerdict::NoAExFound(checked))
}

const NONTRIVIAL_PROBES: usize = 4096;

/// Two points of the space with different (non-abstain) labels, or `None`
/// when the classifier is constant.
pub fn is_nontrivial<S: Scalar>(classifier: &Classifier<S>, settings: &Settings) -> Result<Option<(Vec<S>, Vec<S>)>> {
    let space = classifier.space();
    let lower: Vec<S> = space.domains().iter().map(Domain::lower).collect();
    let upper: Vec<S> = space.domains().iter().map(Domain::upper).collect();
    let two = S::from_i64_exact(2);
    let center: Vec<S> = space
        .domains()
        .iter()
        .map(|d| match d {
            Domain::Real { lo, hi } => (lo.clone() + hi.clone()) / two.clone(),
            _ => d.value_at(d.levels().unwrap() / 2),
        })
        .collect();
    let mut probes = vec![lower, upper, center];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let full = DistanceSpec::new(Norm::L0, S::from_usize(space.dim()).unwrap())?;
    for _ in 0..NONTRIVIAL_PROBES {
        probes.push(sample_point(space, &probes[0].clone(), &full, &mut rng));
    }
    let mut first: Option<(Vec<S>, ClassLabel)> = None;
    for p in probes {
        let l = classifier.evaluate(&p)?;
        if l.index().is_none() {
            continue;
        }
        match &first {
            None => first = Some((p, l)),
            Some((q, lq)) if *lq != l => return Ok(Some((q.clone(), p))),
            _ => {}
        }
    }
    let (anchor, _) = first.ok_or_else(|| Error::NotApplicable("every probe abstained".into()))?;
    // Complete check: is any point classified differently from the anchor?
    let problem = ExplanationProblem::predicted(classifier, anchor.clone())?;
    let spec = match route_for(classifier, Norm::LInf) {
        Ok(_) => {
            let span = space
                .domains()
                .iter()
                .map(|d| d.upper() - d.lower())
                .fold(S::zero(), |acc, w| if w > acc { w } else { acc });
            DistanceSpec::new(Norm::LInf, span)?
        }
        Err(_) => full,
    };
    match find_aex(&problem, &spec, &[], settings)? {
        AexResult::Found(x) => Ok(Some((anchor, x))),
        AexResult::None => Ok(None),
        AexResult::Unknown(w) => Err(Error::Undecided(w)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GlobalResult<S> {
    /// `v` and `x` lie within the ball of each other and get different
    /// labels.
    Found {
        v: Vec<S>,
        x: Vec<S>,
    },
    None,
    Unknown(String),
}

fn verify_pair<S: Scalar>(classifier: &Classifier<S>, spec: &DistanceSpec<S>, v: &[S], x: &[S]) -> Result<()> {
    let lv = classifier.evaluate(v)?;
    let lx = classifier.evaluate(x)?;
    if lv.index().is_none() || lx.index().is_none() {
        return Err(Error::Verification(
            "counterexample involves an abstaining point".into(),
        ));
    }
    if lv == lx {
        return Err(Error::Verification("counterexample points share a class".into()));
    }
    if !within_ball(x, v, spec)? {
        return Err(Error::Verification(format!(
            "counterexample points are farther apart than {spec}"
        )));
    }
    Ok(())
}

/// How discrete global queries are answered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GlobalMethod {
    /// Grid walk between two differently classified points; the dual-copy
    /// encoding only when the walk cannot produce a pair inside the ball.
    #[default]
    Auto,
    /// Always the dual-copy encoding (l0 / l∞) or exhaustive pair search.
    DualCopy,
}

/// Counterexample to global robustness: two points within `spec` of each
/// other with different classes.
///
/// On discrete spaces the default method walks the grid from one class to
/// another, one feature step at a time, and returns the step where the
/// class changes; any radius of at least one step contains it. Real-interval
/// spaces walk the segment between the two points and bisect down to the
/// ball size.
pub fn find_global_counterexample<S: Scalar>(
    classifier: &Classifier<S>,
    spec: &DistanceSpec<S>,
    settings: &Settings,
) -> Result<GlobalResult<S>> {
    find_global_counterexample_with(classifier, spec, settings, GlobalMethod::Auto)
}

pub fn find_global_counterexample_with<S: Scalar>(
    classifier: &Classifier<S>,
    spec: &DistanceSpec<S>,
    settings: &Settings,
    method: GlobalMethod,
) -> Result<GlobalResult<S>> {
    let (a, b) = is_nontrivial(classifier, settings)?.ok_or(Error::TrivialClassifier)?;
    let space = classifier.space();
    let result = if space.is_discrete() {
        let floor = minimum_meaningful_epsilon(space, spec.norm)?;
        if !floor.le_tol(&spec.epsilon) {
            return Err(Error::Precondition(format!(
                "epsilon {} is below the discretization floor {floor}",
                spec.epsilon
            )));
        }
        let walked = match method {
            GlobalMethod::Auto => {
                grid_walk(classifier, &a, &b)?.filter(|(v, x)| within_ball(x, v, spec).unwrap_or(false))
            }
            GlobalMethod::DualCopy => None,
        };
        match walked {
            Some((v, x)) => GlobalResult::Found { v, x },
            None => dual_copy(classifier, spec, settings)?,
        }
    } else {
        walk_to_boundary(classifier, spec, a, b)?
    };
    if let GlobalResult::Found { v, x } = &result {
        verify_pair(classifier, spec, v, x)?;
    }
    Ok(result)
}

fn dual_copy<S: Scalar>(
    classifier: &Classifier<S>,
    spec: &DistanceSpec<S>,
    settings: &Settings,
) -> Result<GlobalResult<S>> {
    let space = classifier.space();
    Ok(match spec.norm {
        Norm::L0 | Norm::LInf => {
            let f: Formula = global_query(classifier, spec)?;
            match settings.backend.solve(&f, settings.budget)? {
                SolveResult::Sat(model) => GlobalResult::Found {
                    v: decode(&model, &f, space, CopyTag::Y)?,
                    x: decode(&model, &f, space, CopyTag::X)?,
                },
                SolveResult::Unsat => GlobalResult::None,
                SolveResult::ResourceOut => GlobalResult::Unknown("solver budget exhausted".into()),
            }
        }
        Norm::L1 | Norm::L2 => match brute::brute_global(classifier, spec, brute::DEFAULT_CAP)? {
            Some((v, x)) => GlobalResult::Found { v, x },
            None => GlobalResult::None,
        },
    })
}

/// Moves from `a` to `b` one feature at a time and returns two adjacent
/// grid points (one level apart, or a categorical jump) with different
/// classes. Along a feature whose far end changes the class, bisection on
/// the level keeps the endpoint labels apart until they are adjacent.
/// `None` when the pair found involves an abstaining point.
fn grid_walk<S: Scalar>(classifier: &Classifier<S>, a: &[S], b: &[S]) -> Result<Option<(Vec<S>, Vec<S>)>> {
    let space = classifier.space();
    let mut cur = space.levels_of(a)?;
    let target = space.levels_of(b)?;
    let start = classifier.evaluate(a)?;
    let label_at = |levels: &[u64]| classifier.evaluate(&space.point_at(levels));
    for i in 0..cur.len() {
        if cur[i] == target[i] {
            continue;
        }
        let mut far = cur.clone();
        far[i] = target[i];
        if label_at(&far)? == start {
            cur = far;
            continue;
        }
        // label(cur) == start, label(far) != start
        let (mut lo, mut hi) = (cur[i], target[i]);
        if !matches!(space.domain(i), Domain::Categorical(_)) {
            while lo.abs_diff(hi) > 1 {
                let mid = lo.min(hi) + lo.abs_diff(hi) / 2;
                let mut probe = cur.clone();
                probe[i] = mid;
                if label_at(&probe)? == start {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let mut near = cur.clone();
        near[i] = lo;
        far[i] = hi;
        if label_at(&far)?.index().is_none() {
            return Ok(None);
        }
        return Ok(Some((space.point_at(&near), space.point_at(&far))));
    }
    Ok(None)
}

fn walk_to_boundary<S: Scalar>(
    classifier: &Classifier<S>,
    spec: &DistanceSpec<S>,
    a: Vec<S>,
    b: Vec<S>,
) -> Result<GlobalResult<S>> {
    if spec.norm == Norm::L0 {
        if spec.l0_budget() == 0 {
            return Err(Error::Precondition(
                "an l0 radius below 1 only contains the point itself".into(),
            ));
        }
        // change one coordinate at a time from a toward b
        let la = classifier.evaluate(&a)?;
        let mut cur = a;
        for i in 0..b.len() {
            let mut next = cur.clone();
            next[i] = b[i].clone();
            if classifier.evaluate(&next)? != la {
                return Ok(GlobalResult::Found { v: cur, x: next });
            }
            cur = next;
        }
        unreachable!("the walk ends at b, which is classified differently");
    }
    if spec.epsilon <= S::zero() {
        return Err(Error::Precondition("epsilon must be > 0".into()));
    }
    let t = find_transition_point(classifier, &a, &b, &spec.epsilon, spec.norm)?;
    Ok(GlobalResult::Found {
        v: t.before,
        x: t.after,
    })
}

/// Bracketed class change along a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    /// Point returned as the transition location (first point of the new
    /// class found).
    pub point: Vec<S>,
    /// Last point with the class of `a`.
    pub before: Vec<S>,
    /// First point with a different class.
    pub after: Vec<S>,
}

/// Bisects the segment from `a` to `b` until the two bracketing points are
/// within `tol` of each other under `norm`.
pub fn find_transition_point<S: Scalar>(
    classifier: &Classifier<S>,
    a: &[S],
    b: &[S],
    tol: &S,
    norm: Norm,
) -> Result<Transition<S>> {
    let la = classifier.evaluate(a)?;
    let lb = classifier.evaluate(b)?;
    if la == lb {
        return Err(Error::Precondition(format!("both endpoints are classified {la}")));
    }
    if norm == Norm::L0 {
        return Err(Error::NotApplicable("segment bisection needs a metric norm".into()));
    }
    if *tol <= S::zero() {
        return Err(Error::Precondition("tolerance must be > 0".into()));
    }
    let scale = a
        .iter()
        .chain(b)
        .map(|x| x.abs())
        .fold(S::one(), |m, x| if x > m { x } else { m });
    let resolution = scale.resolution() * S::from_i64_exact(4);
    if *tol < resolution {
        return Err(Error::Precision(format!(
            "tolerance {tol} is below the arithmetic resolution {resolution}"
        )));
    }
    let at = |t: &S| -> Vec<S> {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.clone() + t.clone() * (y.clone() - x.clone()))
            .collect()
    };
    let two = S::from_i64_exact(2);
    let (mut lo, mut hi) = (S::zero(), S::one());
    let (mut before, mut after) = (a.to_vec(), b.to_vec());
    for _ in 0..4096 {
        if distance(&before, &after, norm)? <= *tol {
            return Ok(Transition {
                point: after.clone(),
                before,
                after,
            });
        }
        let mid = (lo.clone() + hi.clone()) / two.clone();
        if mid <= lo || mid >= hi {
            break;
        }
        let p = at(&mid);
        if classifier.evaluate(&p)? == la {
            lo = mid;
            before = p;
        } else {
            hi = mid;
            after = p;
        }
    }
    Err(Error::Precision(format!(
        "could not bracket the transition to within {tol}"
    )))
}

/// Counterexample to the score-gap form of global robustness: two points in
/// the ball whose linear scores differ by more than `delta`.
pub fn find_global_counterexample_delta<S: Scalar>(
    classifier: &Classifier<S>,
    spec: &DistanceSpec<S>,
    delta: &S,
) -> Result<Option<(Vec<S>, Vec<S>)>> {
    let (weights, _) = match classifier.body() {
        Body::Linear { weights, bias } => (weights, bias),
        other => {
            return Err(Error::NotApplicable(format!(
                "the score-gap query needs a linear model, not {}",
                other.kind_name()
            )))
        }
    };
    if *delta <= S::zero() {
        return Err(Error::Precondition("delta must be > 0".into()));
    }
    let space = classifier.space();
    let eps = spec.epsilon.to_rational();
    // per-feature: largest move allowed and the resulting score change
    let mut moves: Vec<(BigRational, BigRational)> = Vec::new(); // (step, |w|·step)
    for (i, d) in space.domains().iter().enumerate() {
        let width = d.upper().to_rational() - d.lower().to_rational();
        let reach = match d {
            Domain::Real { .. } => {
                if spec.norm == Norm::L0 {
                    width.clone()
                } else {
                    eps.clone().min(width.clone())
                }
            }
            Domain::Categorical(_) => {
                return Err(Error::NotApplicable(
                    "the score-gap query needs ordered features".into(),
                ))
            }
            _ => {
                let step = d.step().unwrap();
                let n = d.levels().unwrap() - 1;
                let s = if spec.norm == Norm::L0 {
                    n
                } else {
                    linf_steps(&spec.epsilon, &step).min(n)
                };
                BigRational::from_integer(s.into()) * step.to_rational()
            }
        };
        let gain = weights[i].to_rational().abs() * &reach;
        moves.push((reach, gain));
    }
    let chosen: Vec<usize> = match spec.norm {
        Norm::LInf => (0..moves.len()).collect(),
        Norm::L1 => {
            let best = (0..moves.len()).max_by(|&a, &b| moves[a].1.cmp(&moves[b].1).then(b.cmp(&a)));
            best.into_iter().collect()
        }
        Norm::L0 => {
            let mut idx: Vec<usize> = (0..moves.len()).collect();
            idx.sort_by(|&a, &b| moves[b].1.cmp(&moves[a].1).then(a.cmp(&b)));
            idx.truncate(spec.l0_budget());
            idx
        }
        Norm::L2 => {
            return Err(Error::NotApplicable(
                "the closed-form score-gap query covers l0, l1 and linf".into(),
            ))
        }
    };
    let gap = chosen.iter().fold(BigRational::zero(), |acc, &i| acc + &moves[i].1);
    if gap <= delta.to_rational() {
        return Ok(None);
    }
    // start at the end of each chosen feature that lets the score rise
    let mut v: Vec<S> = space.domains().iter().map(Domain::lower).collect();
    let mut x = v.clone();
    for &i in &chosen {
        let d = space.domain(i);
        let reach = S::from_rational(&moves[i].0);
        if weights[i] >= S::zero() {
            v[i] = d.lower();
            x[i] = d.lower() + reach;
        } else {
            v[i] = d.upper();
            x[i] = d.upper() - reach;
        }
    }
    Ok(Some((v, x)))
}

/// One evaluation point of a certification demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifyRow<S> {
    pub point: Vec<S>,
    pub sampled: SampleVerdict<S>,
    pub complete: RobustnessVerdict<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyReport<S> {
    pub spec: DistanceSpec<S>,
    pub rows: Vec<CertifyRow<S>>,
    /// Two points within the ball of each other with different classes.
    pub refutation: GlobalResult<S>,
}

impl<S: Scalar> CertifyReport<S> {
    pub fn all_sampled_clean(&self) -> bool {
        self.rows
            .iter()
            .all(|r| matches!(r.sampled, SampleVerdict::NoAExFound(_)))
    }

    pub fn refuted(&self) -> bool {
        matches!(self.refutation, GlobalResult::Found { .. })
    }
}

/// Contrasts sampled and complete local verdicts at `points` with a
/// counterexample that refutes certified robustness for the whole model.
pub fn certify_demo<S: Scalar>(
    classifier: &Classifier<S>,
    spec: &DistanceSpec<S>,
    points: &[Vec<S>],
    cfg: &SamplingConfig<S>,
    settings: &Settings,
) -> Result<CertifyReport<S>> {
    let mut rows = Vec::with_capacity(points.len());
    for (k, p) in points.iter().enumerate() {
        let problem = ExplanationProblem::predicted(classifier, p.clone())?;
        let point_cfg = SamplingConfig {
            seed: cfg.seed.wrapping_add(k as u64),
            ..cfg.clone()
        };
        rows.push(CertifyRow {
            point: p.clone(),
            sampled: sample_local_robustness(&problem, spec, &point_cfg)?,
            complete: is_locally_robust(&problem, spec, None, settings)?,
        });
    }
    let refutation = find_global_counterexample(classifier, spec, settings)?;
    Ok(CertifyReport {
        spec: spec.clone(),
        rows,
        refutation,
    })
}

/// One row of a benchmark table: model shape, query and outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub model: String,
    pub m: usize,
    pub k: usize,
    pub depth: usize,
    pub neurons: usize,
    pub norm: Norm,
    pub epsilon: String,
    pub aex: Option<bool>,
    pub time: Duration,
    pub error: Option<String>,
}

/// Runs a global query and records it as a benchmark row.
pub fn bench_row<S: Scalar>(
    name: &str,
    classifier: &Classifier<S>,
    spec: &DistanceSpec<S>,
    settings: &Settings,
) -> BenchRow {
    let (depth, neurons) = match classifier.body() {
        Body::Bnn(b) => (b.depth(), b.neurons()),
        _ => (0, 0),
    };
    let start = Instant::now();
    let outcome = find_global_counterexample(classifier, spec, settings);
    let time = start.elapsed();
    let (aex, error) = match outcome {
        Ok(GlobalResult::Found { .. }) => (Some(true), None),
        Ok(GlobalResult::None) => (Some(false), None),
        Ok(GlobalResult::Unknown(w)) => (None, Some(w)),
        Err(e) => (None, Some(e.to_string())),
    };
    BenchRow {
        model: name.to_string(),
        m: classifier.dim(),
        k: classifier.num_classes(),
        depth,
        neurons,
        norm: spec.norm,
        epsilon: crate::scalar::scalar_text(&spec.epsilon),
        aex,
        time,
        error,
    }
}

/// Converts an `f64` tolerance into the scalar type; used by callers that
/// take user input as decimals.
pub fn tolerance<S: Scalar>(t: f64) -> S {
    S::from_f64(t).unwrap_or_else(S::zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{build_kappa1, build_kappa2, kappa1_training_data};
    use crate::model::generate::{random_bnn, BnnShape};
    use crate::model::Lookup;

    const THRESHOLD: f64 = 0.64735516 / 0.93198992;

    fn linf(e: f64) -> DistanceSpec<f64> {
        DistanceSpec::new(Norm::LInf, e).unwrap()
    }

    #[test]
    fn kappa1_local_examples() {
        let k1 = build_kappa1::<f64>();
        let e = ExplanationProblem::predicted(&k1, vec![0.7]).unwrap();
        let s = Settings::default();
        match find_aex(&e, &linf(0.1), &[], &s).unwrap() {
            AexResult::Found(x) => assert!(x[0] < THRESHOLD && x[0] >= 0.6 - 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(find_aex(&e, &linf(0.005), &[], &s).unwrap(), AexResult::None);
        assert_eq!(find_aex(&e, &linf(0.1), &[0], &s).unwrap(), AexResult::None);
        assert_eq!(
            is_locally_robust(&e, &linf(0.005), None, &s).unwrap(),
            RobustnessVerdict::Robust
        );
        match is_locally_robust(&e, &linf(0.006), None, &s).unwrap() {
            RobustnessVerdict::NotRobust(x) => assert!(x[0] < THRESHOLD),
            other => panic!("{other:?}"),
        }
        let xi = ConstraintSet::new().at_least(0, 0.695);
        assert_eq!(
            is_locally_robust(&e, &linf(0.1), Some(&xi), &s).unwrap(),
            RobustnessVerdict::Robust
        );
        assert!(matches!(
            is_locally_robust(&e, &linf(0.0), None, &s),
            Err(Error::Precondition(_))
        ));
        let bad = ConstraintSet::new().at_least(0, 0.9).at_most(0, 0.8);
        assert!(matches!(
            is_locally_robust(&e, &linf(0.1), Some(&bad), &s),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn exact_flip_radius_is_still_robust() {
        let k1 = build_kappa1::<BigRational>();
        let v = BigRational::new(7.into(), 10.into());
        let e = ExplanationProblem::predicted(&k1, vec![v]).unwrap();
        let t = local_flip_threshold(&e, Norm::LInf, &BigRational::zero(), &Settings::default()).unwrap();
        assert!(t.exact);
        let at = DistanceSpec::new(Norm::LInf, t.epsilon.clone()).unwrap();
        assert_eq!(
            is_locally_robust(&e, &at, None, &Settings::default()).unwrap(),
            RobustnessVerdict::Robust
        );
        assert!((f64::from_rational(&t.epsilon) - 0.00540541).abs() < 1e-8);
    }

    #[test]
    fn sampling_never_claims_robustness() {
        let k1 = build_kappa1::<f64>();
        let e = ExplanationProblem::predicted(&k1, vec![0.7]).unwrap();
        assert_eq!(
            sample_local_robustness(&e, &linf(0.005), &SamplingConfig::uniform(200, 1)).unwrap(),
            SampleVerdict::NoAExFound(200)
        );
        match sample_local_robustness(&e, &linf(0.1), &SamplingConfig::uniform(50, 1)).unwrap() {
            SampleVerdict::AExFound(x) => assert!(x[0] < THRESHOLD),
            other => panic!("{other:?}"),
        }
        assert!(sample_local_robustness(&e, &linf(0.1), &SamplingConfig::uniform(0, 1)).is_err());
    }

    #[test]
    fn nontrivial_and_trivial() {
        let s = Settings::default();
        let k1 = build_kappa1::<f64>();
        let (a, b) = is_nontrivial(&k1, &s).unwrap().unwrap();
        assert_ne!(k1.evaluate(&a).unwrap(), k1.evaluate(&b).unwrap());
        let space = FeatureSpace::new(vec![Domain::<f64>::Binary; 3]).unwrap();
        let table = Lookup::new(&space, vec![], 1).unwrap();
        let c = Classifier::with_class_count(space, 2, Body::Lookup(table)).unwrap();
        assert_eq!(is_nontrivial(&c, &s).unwrap(), None);
        assert!(matches!(
            find_global_counterexample(&c, &DistanceSpec::new(Norm::L0, 1.0).unwrap(), &s),
            Err(Error::TrivialClassifier)
        ));
    }

    #[test]
    fn global_counterexamples() {
        let s = Settings::default();
        let q = build_kappa1::<f64>().quantized(&1e-6).unwrap();
        match find_global_counterexample(&q, &linf(0.01), &s).unwrap() {
            GlobalResult::Found { v, x } => {
                let (lo, hi) = if v[0] < x[0] { (v[0], x[0]) } else { (x[0], v[0]) };
                assert!(lo < THRESHOLD + 1e-6 && hi >= THRESHOLD - 1e-6, "{lo} {hi}");
            }
            other => panic!("{other:?}"),
        }
        let k1 = build_kappa1::<f64>();
        match find_global_counterexample(&k1, &linf(1e-6), &s).unwrap() {
            GlobalResult::Found { v, x } => assert!((v[0] - THRESHOLD).abs() < 1e-5 && (x[0] - THRESHOLD).abs() < 1e-5),
            other => panic!("{other:?}"),
        }
        let shape = BnnShape {
            inputs: 8,
            hidden: vec![6, 4],
            classes: 2,
        };
        for seed in 0..5 {
            let net = random_bnn::<f64>(&shape, seed).unwrap();
            for method in [GlobalMethod::Auto, GlobalMethod::DualCopy] {
                let spec = DistanceSpec::new(Norm::L0, 1.0).unwrap();
                match find_global_counterexample_with(&net, &spec, &s, method).unwrap() {
                    GlobalResult::Found { v, x } => {
                        assert_eq!(v.iter().zip(&x).filter(|(a, b)| a != b).count(), 1);
                    }
                    other => panic!("{other:?}"),
                }
            }
        }
    }

    #[test]
    fn score_gap_variant() {
        let k1 = build_kappa1::<f64>();
        assert!(find_global_counterexample_delta(&k1, &linf(0.1), &0.05)
            .unwrap()
            .is_some());
        assert!(find_global_counterexample_delta(&k1, &linf(0.01), &0.05)
            .unwrap()
            .is_none());
        assert!(find_global_counterexample_delta(&k1, &linf(0.1), &0.0).is_err());
        let (v, x) = find_global_counterexample_delta(&k1, &linf(0.1), &0.05)
            .unwrap()
            .unwrap();
        assert!((k1.score(&x).unwrap() - k1.score(&v).unwrap()).abs() > 0.05);
        assert!(within_ball(&x, &v, &linf(0.1)).unwrap());
        let k2 = build_kappa2::<f64>();
        assert!(matches!(
            find_global_counterexample_delta(&k2, &linf(0.1), &0.05),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn transition_points() {
        let k1 = build_kappa1::<f64>();
        let t = find_transition_point(&k1, &[0.4], &[0.7], &1e-6, Norm::LInf).unwrap();
        assert!((t.point[0] - THRESHOLD).abs() < 1e-6);
        assert!(k1.evaluate(&t.before).unwrap() != k1.evaluate(&t.after).unwrap());
        let k2 = build_kappa2::<f64>();
        let t2 = find_transition_point(&k2, &[0.4, 1.0], &[0.7, 1.0], &1e-6, Norm::LInf).unwrap();
        assert!((t2.point[0] - t.point[0]).abs() < 1e-6);
        assert!(matches!(
            find_transition_point(&k1, &[0.8], &[0.9], &1e-6, Norm::LInf),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            find_transition_point(&k1, &[0.4], &[0.7], &1e-18, Norm::LInf),
            Err(Error::Precision(_))
        ));
    }

    #[test]
    fn certification_is_refuted() {
        let k1 = build_kappa1::<f64>();
        let points: Vec<Vec<f64>> = kappa1_training_data::<f64>()
            .into_iter()
            .map(|(x, _)| vec![x])
            .collect();
        let r = certify_demo(
            &k1,
            &linf(0.005),
            &points,
            &SamplingConfig::uniform(100, 3),
            &Settings::default(),
        )
        .unwrap();
        assert!(r.all_sampled_clean());
        assert!(r.rows.iter().all(|row| row.complete == RobustnessVerdict::Robust));
        assert!(r.refuted());
        let r = certify_demo(
            &k1,
            &linf(0.005),
            &[],
            &SamplingConfig::uniform(10, 3),
            &Settings::default(),
        )
        .unwrap();
        assert!(r.rows.is_empty() && r.refuted());
    }

    #[test]
    fn kappa2_routes_through_polyhedra() {
        let k2 = build_kappa2::<f64>();
        let e = ExplanationProblem::predicted(&k2, vec![0.0, 1.0]).unwrap();
        assert_eq!(route_for(&k2, Norm::LInf).unwrap(), Route::Polyhedral);
        assert!(matches!(route_for(&k2, Norm::L2), Err(Error::EncodingUnsupported(_))));
        assert_eq!(
            find_aex(&e, &linf(0.5), &[], &Settings::default()).unwrap(),
            AexResult::None
        );
        assert!(matches!(
            find_aex(&e, &linf(0.7), &[], &Settings::default()).unwrap(),
            AexResult::Found(_)
        ));
    }
}
