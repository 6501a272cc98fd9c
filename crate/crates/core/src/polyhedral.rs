//! Exact reasoning over real-valued features for piecewise-linear models.
//!
//! A classifier built from constants, linear pieces and guarded branches
//! splits the feature space into polyhedral cells with a fixed class. An
//! adversarial example exists iff some cell of a different class meets the
//! ball (plus box, fixed features and side constraints). Each candidate cell
//! is a small system of linear inequalities, strict or not, decided by
//! Fourier–Motzkin elimination over exact rationals; a witness is rebuilt
//! by back-substitution.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::distance::{DistanceSpec, Norm};
use crate::error::{Error, Result};
use crate::model::{Atom, Body, CmpOp, Domain, FeatureSpace, Operand};
use crate::scalar::Scalar;

/// Largest intermediate system before a query is given up on.
pub const MAX_CONSTRAINTS: usize = 20_000;
/// Largest number of cells or feature subsets tried for one query.
pub const MAX_CASES: usize = 100_000;

/// `a·z + c >= 0`, or `> 0` when `strict`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinCon {
    pub a: Vec<BigRational>,
    pub c: BigRational,
    pub strict: bool,
}

impl LinCon {
    fn new(n: usize) -> Self {
        LinCon {
            a: vec![BigRational::zero(); n],
            c: BigRational::zero(),
            strict: false,
        }
    }

    fn negated(&self, strict: bool) -> LinCon {
        LinCon {
            a: self.a.iter().map(|x| -x).collect(),
            c: -&self.c,
            strict,
        }
    }

    pub fn holds(&self, z: &[BigRational]) -> bool {
        let s = self.a.iter().zip(z).fold(self.c.clone(), |acc, (a, x)| acc + a * x);
        if self.strict {
            s.is_positive()
        } else {
            !s.is_negative()
        }
    }

    /// Scales so the first nonzero coefficient has magnitude one.
    fn normalized(mut self) -> LinCon {
        if let Some(p) = self.a.iter().find(|x| !x.is_zero()).map(|x| x.abs()) {
            for x in &mut self.a {
                *x /= &p;
            }
            self.c /= p;
        }
        self
    }
}

/// Keeps only the tightest constraint per coefficient vector.
fn simplify(cons: Vec<LinCon>) -> Option<Vec<LinCon>> {
    let mut best: HashMap<Vec<BigRational>, (BigRational, bool)> = HashMap::new();
    let mut order: Vec<Vec<BigRational>> = Vec::new();
    for k in cons {
        let k = k.normalized();
        if k.a.iter().all(Zero::is_zero) {
            let ok = if k.strict {
                k.c.is_positive()
            } else {
                !k.c.is_negative()
            };
            if !ok {
                return None;
            }
            continue;
        }
        match best.get_mut(&k.a) {
            Some((c, strict)) => {
                if k.c < *c || (k.c == *c && k.strict) {
                    *c = k.c;
                    *strict = k.strict;
                }
            }
            None => {
                order.push(k.a.clone());
                best.insert(k.a, (k.c, k.strict));
            }
        }
    }
    Some(
        order
            .into_iter()
            .map(|a| {
                let (c, strict) = best.remove(&a).unwrap();
                LinCon { a, c, strict }
            })
            .collect(),
    )
}

/// How back-substitution picks a value inside the feasible interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pick {
    /// The preferred value if feasible, else the nearest feasible value
    /// (the bound itself when it is closed).
    Nearest,
    /// The preferred value if strictly inside, else the interval midpoint.
    Interior,
}

struct Bound {
    value: BigRational,
    strict: bool,
}

fn two() -> BigRational {
    BigRational::from_integer(BigInt::from(2))
}

fn pick_value(lower: Option<Bound>, upper: Option<Bound>, prefer: &BigRational, mode: Pick) -> BigRational {
    let above = |b: &Bound, x: &BigRational| if b.strict { x > &b.value } else { x >= &b.value };
    let below = |b: &Bound, x: &BigRational| if b.strict { x < &b.value } else { x <= &b.value };
    let fits = lower.as_ref().is_none_or(|l| above(l, prefer)) && upper.as_ref().is_none_or(|u| below(u, prefer));
    let strictly = lower.as_ref().is_none_or(|l| prefer > &l.value) && upper.as_ref().is_none_or(|u| prefer < &u.value);
    match mode {
        Pick::Nearest if fits => return prefer.clone(),
        Pick::Interior if strictly => return prefer.clone(),
        _ => {}
    }
    match (lower, upper) {
        (Some(l), Some(u)) => {
            if mode == Pick::Nearest {
                if prefer < &l.value && !l.strict {
                    return l.value;
                }
                if prefer > &u.value && !u.strict {
                    return u.value;
                }
            }
            if l.value == u.value {
                return l.value;
            }
            (l.value + u.value) / two()
        }
        (Some(l), None) => {
            if mode == Pick::Nearest && !l.strict {
                l.value
            } else {
                l.value + BigRational::one()
            }
        }
        (None, Some(u)) => {
            if mode == Pick::Nearest && !u.strict {
                u.value
            } else {
                u.value - BigRational::one()
            }
        }
        (None, None) => prefer.clone(),
    }
}

/// Finds a point satisfying every constraint, or `None` when the system is
/// infeasible. Variables are eliminated from the last to the first and
/// assigned in the opposite order.
pub fn feasible_point(
    n: usize,
    cons: &[LinCon],
    prefer: &[BigRational],
    mode: Pick,
) -> Result<Option<Vec<BigRational>>> {
    let mut stages: Vec<Vec<LinCon>> = Vec::with_capacity(n + 1);
    let mut sys = match simplify(cons.to_vec()) {
        Some(s) => s,
        None => return Ok(None),
    };
    for k in (0..n).rev() {
        stages.push(sys.clone());
        let (mut pos, mut neg, mut next) = (Vec::new(), Vec::new(), Vec::new());
        for con in sys {
            if con.a[k].is_positive() {
                pos.push(con);
            } else if con.a[k].is_negative() {
                neg.push(con);
            } else {
                next.push(con);
            }
        }
        if pos.len() * neg.len() + next.len() > MAX_CONSTRAINTS {
            return Err(Error::Undecided("polyhedral system grew too large".into()));
        }
        for p in &pos {
            for q in &neg {
                let fp = p.a[k].clone();
                let fq = -q.a[k].clone();
                let mut r = LinCon::new(n);
                for i in 0..n {
                    r.a[i] = &p.a[i] / &fp + &q.a[i] / &fq;
                }
                r.a[k] = BigRational::zero();
                r.c = &p.c / &fp + &q.c / &fq;
                r.strict = p.strict || q.strict;
                next.push(r);
            }
        }
        sys = match simplify(next) {
            Some(s) => s,
            None => return Ok(None),
        };
    }
    // All variables gone and the residual constants hold: feasible.
    let mut z = vec![BigRational::zero(); n];
    for k in 0..n {
        let stage = &stages[n - 1 - k];
        let mut lower: Option<Bound> = None;
        let mut upper: Option<Bound> = None;
        for con in stage {
            let ak = &con.a[k];
            if ak.is_zero() {
                continue;
            }
            let rest = (0..k).fold(con.c.clone(), |acc, i| acc + &con.a[i] * &z[i]);
            let v = -rest / ak;
            if ak.is_positive() {
                if lower
                    .as_ref()
                    .is_none_or(|b| v > b.value || (v == b.value && con.strict))
                {
                    lower = Some(Bound {
                        value: v,
                        strict: con.strict,
                    });
                }
            } else if upper
                .as_ref()
                .is_none_or(|b| v < b.value || (v == b.value && con.strict))
            {
                upper = Some(Bound {
                    value: v,
                    strict: con.strict,
                });
            }
        }
        z[k] = pick_value(lower, upper, &prefer[k], mode);
    }
    debug_assert!(cons.iter().all(|c| c.holds(&z)));
    Ok(Some(z))
}

/// A polyhedral region where the classifier outputs `class`.
#[derive(Debug, Clone)]
pub struct Cell {
    pub constraints: Vec<LinCon>,
    pub class: usize,
}

fn atom_cons<S: Scalar>(a: &Atom<S>, op: CmpOp, n: usize) -> Vec<Vec<LinCon>> {
    // e = x_f - rhs
    let mut e = LinCon::new(n);
    e.a[a.feature] += BigRational::one();
    match &a.rhs {
        Operand::Const(c) => e.c -= c.to_rational(),
        Operand::Feature(j) => e.a[*j] -= BigRational::one(),
    }
    match op {
        CmpOp::Ge => vec![vec![e]],
        CmpOp::Gt => vec![vec![LinCon { strict: true, ..e }]],
        CmpOp::Le => vec![vec![e.negated(false)]],
        CmpOp::Lt => vec![vec![e.negated(true)]],
        CmpOp::Eq => vec![vec![e.negated(false), e]],
        CmpOp::Ne => vec![vec![e.negated(true)], vec![LinCon { strict: true, ..e }]],
    }
}

/// Every class region of a piecewise-linear body, as disjoint cells over
/// `n` variables (the features come first).
pub fn cells<S: Scalar>(body: &Body<S>, n: usize) -> Result<Vec<Cell>> {
    let mut out = Vec::new();
    collect_cells(body, n, Vec::new(), &mut out)?;
    Ok(out)
}

fn collect_cells<S: Scalar>(body: &Body<S>, n: usize, prefix: Vec<LinCon>, out: &mut Vec<Cell>) -> Result<()> {
    if out.len() > MAX_CASES {
        return Err(Error::Undecided("too many polyhedral cells".into()));
    }
    match body {
        Body::Constant(k) => out.push(Cell {
            constraints: prefix,
            class: *k,
        }),
        Body::Linear { weights, bias } => {
            let mut s = LinCon::new(n);
            for (i, w) in weights.iter().enumerate() {
                s.a[i] = w.to_rational();
            }
            s.c = -bias.to_rational();
            let mut one = prefix.clone();
            one.push(s.clone());
            out.push(Cell {
                constraints: one,
                class: 1,
            });
            let mut zero = prefix;
            zero.push(s.negated(true));
            out.push(Cell {
                constraints: zero,
                class: 0,
            });
        }
        Body::Piecewise(branches) => {
            // Disjuncts describing "no earlier guard held".
            let mut before: Vec<Vec<LinCon>> = vec![Vec::new()];
            for b in branches {
                let mut active = before.clone();
                for a in &b.guard.atoms {
                    let options = atom_cons(a, a.op, n);
                    active = active
                        .iter()
                        .flat_map(|base| {
                            options.iter().map(move |o| {
                                let mut c = base.clone();
                                c.extend(o.iter().cloned());
                                c
                            })
                        })
                        .collect();
                }
                for conj in active {
                    let mut p = prefix.clone();
                    p.extend(conj);
                    collect_cells(&b.body, n, p, out)?;
                }
                if b.guard.atoms.is_empty() {
                    break;
                }
                // Guard failed: one of its atoms is false.
                let negations: Vec<Vec<LinCon>> = b
                    .guard
                    .atoms
                    .iter()
                    .flat_map(|a| atom_cons(a, a.op.negate(), n))
                    .collect();
                before = before
                    .iter()
                    .flat_map(|base| {
                        negations.iter().map(move |o| {
                            let mut c = base.clone();
                            c.extend(o.iter().cloned());
                            c
                        })
                    })
                    .collect();
                if before.len() > MAX_CASES {
                    return Err(Error::Undecided("too many polyhedral cells".into()));
                }
            }
        }
        Body::Bnn(_) | Body::Lookup(_) => {
            return Err(Error::EncodingUnsupported(format!(
                "{} bodies have no polyhedral form",
                body.kind_name()
            )))
        }
    }
    Ok(())
}

/// Box, ball, fixed-feature and interval constraints around `v`.
pub struct Region<'a, S> {
    pub space: &'a FeatureSpace<S>,
    pub center: &'a [S],
    pub spec: &'a DistanceSpec<S>,
    pub fixed: &'a [usize],
    pub intervals: &'a [(usize, Option<S>, Option<S>)],
}

fn bound_con(n: usize, i: usize, value: BigRational, lower: bool) -> LinCon {
    let mut c = LinCon::new(n);
    if lower {
        c.a[i] = BigRational::one();
        c.c = -value;
    } else {
        c.a[i] = -BigRational::one();
        c.c = value;
    }
    c
}

/// Searches for a point of the region whose class differs from `label`.
/// Cells are tried in order; the first feasible one yields the witness,
/// picked as close to the center as the constraints allow.
pub fn find_other_class<S: Scalar>(
    body: &Body<S>,
    region: &Region<'_, S>,
    label: usize,
    mode: Pick,
) -> Result<Option<Vec<BigRational>>> {
    let m = region.space.dim();
    let aux = if region.spec.norm == Norm::L1 { m } else { 0 };
    let n = m + aux;
    if region.spec.norm == Norm::L2 {
        return Err(Error::EncodingUnsupported(
            "l2 balls are not polyhedral; use l0, l1 or linf for continuous features".into(),
        ));
    }
    let v: Vec<BigRational> = region.center.iter().map(Scalar::to_rational).collect();
    let eps = region.spec.epsilon.to_rational();

    let mut base = Vec::new();
    for (i, d) in region.space.domains().iter().enumerate() {
        match d {
            Domain::Real { lo, hi } => {
                base.push(bound_con(n, i, lo.to_rational(), true));
                base.push(bound_con(n, i, hi.to_rational(), false));
            }
            _ => {
                return Err(Error::EncodingUnsupported(
                    "the polyhedral route needs every feature to be a real interval".into(),
                ))
            }
        }
    }
    for &i in region.fixed {
        base.push(bound_con(n, i, v[i].clone(), true));
        base.push(bound_con(n, i, v[i].clone(), false));
    }
    for (i, lo, hi) in region.intervals {
        if let Some(lo) = lo {
            base.push(bound_con(n, *i, lo.to_rational(), true));
        }
        if let Some(hi) = hi {
            base.push(bound_con(n, *i, hi.to_rational(), false));
        }
    }
    match region.spec.norm {
        Norm::LInf => {
            for (i, vi) in v.iter().enumerate() {
                base.push(bound_con(n, i, vi - &eps, true));
                base.push(bound_con(n, i, vi + &eps, false));
            }
        }
        Norm::L1 => {
            // t_i >= |x_i - v_i|, Σ t_i <= ε
            for (i, vi) in v.iter().enumerate() {
                let t = m + i;
                let mut up = LinCon::new(n);
                up.a[t] = BigRational::one();
                up.a[i] = -BigRational::one();
                up.c = vi.clone();
                let mut down = LinCon::new(n);
                down.a[t] = BigRational::one();
                down.a[i] = BigRational::one();
                down.c = -vi.clone();
                base.push(up);
                base.push(down);
            }
            let mut sum = LinCon::new(n);
            for i in 0..m {
                sum.a[m + i] = -BigRational::one();
            }
            sum.c = eps.clone();
            base.push(sum);
        }
        Norm::L0 | Norm::L2 => {}
    }

    let mut prefer = v.clone();
    prefer.extend(std::iter::repeat_n(BigRational::zero(), aux));
    let all_cells: Vec<Cell> = cells(body, n)?.into_iter().filter(|c| c.class != label).collect();

    // l0: every subset of at most ⌊ε⌋ free features; supersets cover
    // subsets because a free feature may keep its value.
    let free: Vec<usize> = (0..m).filter(|i| !region.fixed.contains(i)).collect();
    let subsets: Vec<Vec<usize>> = if region.spec.norm == Norm::L0 {
        let k = region.spec.l0_budget().min(free.len());
        combinations(&free, k)?
    } else {
        vec![free.clone()]
    };
    for subset in &subsets {
        let mut frame = base.clone();
        if region.spec.norm == Norm::L0 {
            for &i in free.iter().filter(|i| !subset.contains(i)) {
                frame.push(bound_con(n, i, v[i].clone(), true));
                frame.push(bound_con(n, i, v[i].clone(), false));
            }
        }
        for cell in &all_cells {
            let mut sys = frame.clone();
            sys.extend(cell.constraints.iter().cloned());
            if let Some(z) = feasible_point(n, &sys, &prefer, mode)? {
                return Ok(Some(z[..m].to_vec()));
            }
        }
    }
    Ok(None)
}

fn combinations(items: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) -> bool {
        if cur.len() == k {
            out.push(cur.clone());
            return out.len() <= MAX_CASES;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            if !rec(items, k, i + 1, cur, out) {
                return false;
            }
            cur.pop();
        }
        true
    }
    if !rec(items, k, 0, &mut cur, &mut out) {
        return Err(Error::Undecided("too many feature subsets for an l0 ball".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{build_kappa1, build_kappa2};
    use crate::scalar::parse_rational;

    fn q(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn strict_systems() {
        // x > 0, x < 0 is infeasible; x >= 0, x <= 0 is the point 0.
        let gt = LinCon {
            a: vec![q("1")],
            c: q("0"),
            strict: true,
        };
        let lt = LinCon {
            a: vec![q("-1")],
            c: q("0"),
            strict: true,
        };
        assert_eq!(
            feasible_point(1, &[gt.clone(), lt], &[q("5")], Pick::Nearest).unwrap(),
            None
        );
        let ge = LinCon {
            strict: false,
            ..gt.clone()
        };
        let le = LinCon {
            a: vec![q("-1")],
            c: q("0"),
            strict: false,
        };
        assert_eq!(
            feasible_point(1, &[ge, le], &[q("5")], Pick::Nearest).unwrap(),
            Some(vec![q("0")])
        );
        // x + y > 1, x < 1/2, y < 1/2 infeasible
        let s = LinCon {
            a: vec![q("1"), q("1")],
            c: q("-1"),
            strict: true,
        };
        let x = LinCon {
            a: vec![q("-1"), q("0")],
            c: q("1/2"),
            strict: true,
        };
        let y = LinCon {
            a: vec![q("0"), q("-1")],
            c: q("1/2"),
            strict: true,
        };
        assert_eq!(
            feasible_point(2, &[s, x, y], &[q("0"), q("0")], Pick::Nearest).unwrap(),
            None
        );
    }

    #[test]
    fn kappa1_boundary_cases() {
        let k = build_kappa1::<BigRational>();
        let space = k.space().clone();
        let v = vec![q("0.7")];
        let run = |eps: &str| {
            let spec = DistanceSpec::new(Norm::LInf, q(eps)).unwrap();
            let region = Region {
                space: &space,
                center: &v,
                spec: &spec,
                fixed: &[],
                intervals: &[],
            };
            find_other_class(k.body(), &region, 1, Pick::Nearest).unwrap()
        };
        let thr = q("0.64735516") / q("0.93198992");
        let flip = q("0.7") - &thr;
        // at exactly the flip radius the only candidates sit on the
        // boundary, which is class 1
        assert_eq!(run(&crate::scalar::format_rational(&flip)), None);
        assert_eq!(run("0.005"), None);
        let w = run("0.006").unwrap();
        assert!(w[0] < thr && w[0] >= q("0.694"));
    }

    #[test]
    fn kappa2_example_witness() {
        let k = build_kappa2::<BigRational>();
        let space = k.space().clone();
        let v = vec![q("0"), q("1")];
        let spec = DistanceSpec::new(Norm::LInf, q("0.7")).unwrap();
        let region = Region {
            space: &space,
            center: &v,
            spec: &spec,
            fixed: &[],
            intervals: &[],
        };
        let w = find_other_class(k.body(), &region, 0, Pick::Nearest).unwrap().unwrap();
        assert_eq!(k.evaluate(&w).unwrap(), crate::model::ClassLabel::Class(1));
        assert_eq!(w[1], q("1"));
        let spec = DistanceSpec::new(Norm::LInf, q("0.5")).unwrap();
        let region = Region { spec: &spec, ..region };
        assert_eq!(find_other_class(k.body(), &region, 0, Pick::Nearest).unwrap(), None);
    }
}
