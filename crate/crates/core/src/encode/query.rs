use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::classifier::encode_classifier;
use super::formula::{CopyTag, FeatureVars, Formula, Lit, PBConstraint};
use super::inputs::{differ_lit, ensure_inputs, level_expr, level_lits, restrict_levels};
use crate::distance::{DistanceSpec, Norm};
use crate::error::{Error, Result};
use crate::model::{Classifier, Domain, FeatureSpace};
use crate::scalar::Scalar;

/// What the ball is centered on.
#[derive(Debug, Clone, Copy)]
pub enum Center<'a, S> {
    /// A fixed point; the ball constrains copy `x`.
    Point(&'a [S]),
    /// The `y` copy; the ball links both copies.
    Copy,
}

/// Closed interval on one feature; `None` leaves that side open.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureInterval<S> {
    pub feature: usize,
    pub lo: Option<S>,
    pub hi: Option<S>,
}

/// Number of grid steps an l∞ radius allows: `⌊(ε + slack) / step⌋`.
pub fn linf_steps<S: Scalar>(eps: &S, step: &S) -> u64 {
    let r = (eps.to_rational() + S::slack().to_rational()) / step.to_rational();
    r.floor().to_integer().to_u64().unwrap_or(u64::MAX)
}

fn levels_of_domain<S: Scalar>(d: &Domain<S>) -> u64 {
    d.levels().expect("discrete domain")
}

/// Asserts the distance constraint between copy `x` and `center`.
pub fn encode_distance<S: Scalar>(
    f: &mut Formula,
    space: &FeatureSpace<S>,
    center: Center<'_, S>,
    spec: &DistanceSpec<S>,
) -> Result<()> {
    if matches!(spec.norm, Norm::L1 | Norm::L2) {
        return Err(Error::EncodingUnsupported(format!(
            "{} balls are only handled by exhaustive search or the exact polyhedral route",
            spec.norm
        )));
    }
    let xs = ensure_inputs(f, space, CopyTag::X)?;
    let center_levels = match center {
        Center::Point(v) => Some(space.levels_of(v)?),
        Center::Copy => None,
    };
    let ys = match center {
        Center::Copy => Some(ensure_inputs(f, space, CopyTag::Y)?),
        Center::Point(_) => None,
    };
    match spec.norm {
        Norm::L0 => {
            let budget = spec.l0_budget();
            let mut diffs = Vec::new();
            for (i, fv) in xs.iter().enumerate() {
                if matches!(fv, FeatureVars::Constant) {
                    continue;
                }
                let d = match (&center_levels, &ys) {
                    (Some(c), _) => {
                        let eq = level_lits(fv, c[i]);
                        !f.and_gate(&eq)
                    }
                    (None, Some(ys)) => differ_lit(f, fv, &ys[i]),
                    _ => unreachable!(),
                };
                diffs.push(d);
            }
            if budget < diffs.len() {
                f.add_pb(PBConstraint::at_most(&diffs, budget as i64));
            }
        }
        Norm::LInf => {
            for (i, d) in space.domains().iter().enumerate() {
                let n = levels_of_domain(d);
                let fv = &xs[i];
                match d {
                    Domain::Categorical(values) => {
                        let far = |a: usize, b: usize| {
                            let gap = (values[a].clone() - values[b].clone()).abs();
                            !gap.le_tol(&spec.epsilon)
                        };
                        match (&center_levels, &ys) {
                            (Some(c), _) => {
                                let c = c[i] as usize;
                                for a in (0..values.len()).filter(|&a| far(a, c)) {
                                    let l = level_lits(fv, a as u64);
                                    f.add_clause(l.iter().map(|&x| !x).collect());
                                }
                            }
                            (None, Some(ys)) => {
                                for a in 0..values.len() {
                                    for b in (0..values.len()).filter(|&b| far(a, b)) {
                                        let mut c: Vec<Lit> = level_lits(fv, a as u64).iter().map(|&x| !x).collect();
                                        c.extend(level_lits(&ys[i], b as u64).iter().map(|&x| !x));
                                        f.add_clause(c);
                                    }
                                }
                            }
                            _ => unreachable!(),
                        }
                    }
                    _ => {
                        let step = d.step().expect("ordered domain");
                        let s = linf_steps(&spec.epsilon, &step);
                        if s + 1 >= n {
                            continue;
                        }
                        match (&center_levels, &ys) {
                            (Some(c), _) => {
                                let lo = c[i].saturating_sub(s);
                                let hi = (c[i] + s).min(n - 1);
                                restrict_levels(f, fv, n, lo, hi)?;
                            }
                            (None, Some(ys)) => {
                                let mut diff = level_expr(fv);
                                diff.add_scaled(&level_expr(&ys[i]), &BigRational::from_integer(BigInt::from(-1)));
                                let bound = BigRational::from_integer(BigInt::from(s));
                                f.add_le(&diff, &bound, false)?;
                                f.add_ge(&diff, &-bound, false)?;
                            }
                            _ => unreachable!(),
                        }
                    }
                }
            }
        }
        Norm::L1 | Norm::L2 => unreachable!(),
    }
    Ok(())
}

/// Fixes every feature in `fixed` of copy `x` to its value in `v`.
pub fn encode_fixed_features<S: Scalar>(
    f: &mut Formula,
    space: &FeatureSpace<S>,
    v: &[S],
    fixed: &[usize],
) -> Result<()> {
    if fixed.is_empty() {
        return Ok(());
    }
    let xs = ensure_inputs(f, space, CopyTag::X)?;
    let levels = space.levels_of(v)?;
    for &i in fixed {
        if i >= space.dim() {
            return Err(Error::Precondition(format!(
                "feature {} outside 1..={}",
                i + 1,
                space.dim()
            )));
        }
        for l in level_lits(&xs[i], levels[i]) {
            f.add_clause(vec![l]);
        }
    }
    Ok(())
}

/// Restricts copy `copy` to the given per-feature intervals.
pub fn encode_intervals<S: Scalar>(
    f: &mut Formula,
    space: &FeatureSpace<S>,
    intervals: &[FeatureInterval<S>],
    copy: CopyTag,
) -> Result<()> {
    let vars = ensure_inputs(f, space, copy)?;
    for iv in intervals {
        if iv.feature >= space.dim() {
            return Err(Error::Precondition(format!(
                "interval on unknown feature {}",
                iv.feature + 1
            )));
        }
        let d = space.domain(iv.feature);
        let n = levels_of_domain(d);
        let fv = &vars[iv.feature];
        if let Domain::Categorical(values) = d {
            for (l, x) in values.iter().enumerate() {
                let inside =
                    iv.lo.as_ref().is_none_or(|lo| lo.le_tol(x)) && iv.hi.as_ref().is_none_or(|hi| x.le_tol(hi));
                if !inside {
                    let lits = level_lits(fv, l as u64);
                    f.add_clause(lits.iter().map(|&x| !x).collect());
                }
            }
            continue;
        }
        // Ordered grid: value = base + step·level, so the bounds map to a
        // level range.
        let base = d.rational_at(0);
        let step = d.step().expect("ordered domain").to_rational();
        let slack = S::slack().to_rational();
        let last = BigRational::from_integer(BigInt::from(n - 1));
        let lo = match &iv.lo {
            Some(lo) => ((lo.to_rational() - slack.clone() - base.clone()) / step.clone()).ceil(),
            None => BigRational::zero(),
        };
        let hi = match &iv.hi {
            Some(hi) => ((hi.to_rational() + slack - base) / step).floor(),
            None => last.clone(),
        };
        let lo = lo.max(BigRational::zero());
        let hi = hi.min(last);
        if lo > hi {
            f.add_clause(Vec::new());
            continue;
        }
        let lo = lo.to_integer().to_u64().unwrap();
        let hi = hi.to_integer().to_u64().unwrap();
        restrict_levels(f, fv, n, lo, hi)?;
    }
    Ok(())
}

/// Formula for "some `x` within `spec` of `v`, agreeing with `v` on
/// `fixed`, inside `intervals`, is not classified `label`".
pub fn local_query<S: Scalar>(
    classifier: &Classifier<S>,
    v: &[S],
    label: usize,
    spec: &DistanceSpec<S>,
    fixed: &[usize],
    intervals: &[FeatureInterval<S>],
) -> Result<Formula> {
    let mut f = Formula::new();
    let space = classifier.space();
    let classes = encode_classifier(&mut f, classifier, CopyTag::X)?;
    encode_distance(&mut f, space, Center::Point(v), spec)?;
    encode_fixed_features(&mut f, space, v, fixed)?;
    encode_intervals(&mut f, space, intervals, CopyTag::X)?;
    f.add_clause(vec![!classes[label]]);
    Ok(f)
}

/// Dual-copy formula: two points within `spec` of each other with
/// different classes.
pub fn global_query<S: Scalar>(classifier: &Classifier<S>, spec: &DistanceSpec<S>) -> Result<Formula> {
    let mut f = Formula::new();
    let space = classifier.space();
    let cx = encode_classifier(&mut f, classifier, CopyTag::X)?;
    let cy = encode_classifier(&mut f, classifier, CopyTag::Y)?;
    encode_distance(&mut f, space, Center::Copy, spec)?;
    for (a, b) in cx.iter().zip(&cy) {
        f.add_clause(vec![!*a, !*b]);
    }
    Ok(f)
}
