use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::formula::{CopyTag, FeatureVars, Formula, LinExpr, Lit, PBConstraint, VarRole};
use crate::error::{Error, Result};
use crate::model::{Domain, FeatureSpace};
use crate::scalar::Scalar;

fn rat(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn bit_count(levels: u64) -> u32 {
    64 - (levels - 1).leading_zeros()
}

/// Input variables for one copy, created on first use. Every discrete
/// domain is accepted; real intervals are not.
pub fn ensure_inputs<S: Scalar>(f: &mut Formula, space: &FeatureSpace<S>, copy: CopyTag) -> Result<Vec<FeatureVars>> {
    if let Some(vars) = f.varmap.inputs(copy) {
        return Ok(vars.to_vec());
    }
    let mut all = Vec::with_capacity(space.dim());
    for (i, d) in space.domains().iter().enumerate() {
        let levels = d.levels().ok_or_else(|| {
            Error::EncodingUnsupported(format!(
                "feature {} is a real interval; quantize it before encoding",
                i + 1
            ))
        })?;
        let role = VarRole::Input { copy, feature: i };
        let fv = if levels == 1 {
            FeatureVars::Constant
        } else {
            match d {
                Domain::Binary => FeatureVars::Binary(f.new_var(role)),
                Domain::Categorical(_) => {
                    let vars: Vec<u32> = (0..levels).map(|_| f.new_var(role.clone())).collect();
                    let lits: Vec<Lit> = vars.iter().map(|&v| Lit::pos(v)).collect();
                    f.add_pb(PBConstraint::exactly(&lits, 1));
                    FeatureVars::OneHot(vars)
                }
                _ => {
                    let vars: Vec<u32> = (0..bit_count(levels)).map(|_| f.new_var(role.clone())).collect();
                    if !levels.is_power_of_two() {
                        let terms = vars
                            .iter()
                            .enumerate()
                            .map(|(b, &v)| (1i64 << b, Lit::pos(v)))
                            .collect();
                        f.add_pb(PBConstraint {
                            terms,
                            relation: super::formula::Relation::Le,
                            bound: (levels - 1) as i64,
                        });
                    }
                    FeatureVars::Bits(vars)
                }
            }
        };
        all.push(fv);
    }
    f.varmap.set_inputs(copy, all.clone());
    Ok(all)
}

/// Level index of a feature as an integer expression.
pub fn level_expr(fv: &FeatureVars) -> LinExpr {
    let mut e = LinExpr::default();
    match fv {
        FeatureVars::Constant => {}
        FeatureVars::Binary(v) => e.add_term(BigRational::one(), Lit::pos(*v)),
        FeatureVars::OneHot(vs) => {
            for (k, &v) in vs.iter().enumerate().skip(1) {
                e.add_term(rat(k as u64), Lit::pos(v));
            }
        }
        FeatureVars::Bits(vs) => {
            for (b, &v) in vs.iter().enumerate() {
                e.add_term(rat(1u64 << b), Lit::pos(v));
            }
        }
    }
    e
}

/// Feature value as an exact rational expression.
pub fn value_expr<S: Scalar>(domain: &Domain<S>, fv: &FeatureVars) -> LinExpr {
    match (domain, fv) {
        (_, FeatureVars::Constant) => LinExpr::constant(domain.rational_at(0)),
        (Domain::Categorical(values), FeatureVars::OneHot(vs)) => {
            let mut e = LinExpr::default();
            for (x, &v) in values.iter().zip(vs) {
                let c = x.to_rational();
                if !c.is_zero() {
                    e.add_term(c, Lit::pos(v));
                }
            }
            e
        }
        _ => {
            let lo = domain.rational_at(0);
            let step = domain.step().expect("ordered domain").to_rational();
            let mut e = LinExpr::constant(lo);
            e.add_scaled(&level_expr(fv), &step);
            e
        }
    }
}

/// Literals whose conjunction says "this feature sits at `level`".
pub fn level_lits(fv: &FeatureVars, level: u64) -> Vec<Lit> {
    match fv {
        FeatureVars::Constant => Vec::new(),
        FeatureVars::Binary(v) => vec![Lit::new(*v, level == 1)],
        FeatureVars::OneHot(vs) => vec![Lit::pos(vs[level as usize])],
        FeatureVars::Bits(vs) => vs
            .iter()
            .enumerate()
            .map(|(b, &v)| Lit::new(v, level >> b & 1 == 1))
            .collect(),
    }
}

/// Literal true iff both features sit at different levels.
pub fn differ_lit(f: &mut Formula, a: &FeatureVars, b: &FeatureVars) -> Lit {
    let pairs: Vec<(u32, u32)> = match (a, b) {
        (FeatureVars::Constant, FeatureVars::Constant) => return f.false_lit(),
        (FeatureVars::Binary(x), FeatureVars::Binary(y)) => vec![(*x, *y)],
        (FeatureVars::OneHot(xs), FeatureVars::OneHot(ys)) | (FeatureVars::Bits(xs), FeatureVars::Bits(ys)) => {
            xs.iter().copied().zip(ys.iter().copied()).collect()
        }
        _ => panic!("feature encodings of both copies must match"),
    };
    let xors: Vec<Lit> = pairs
        .into_iter()
        .map(|(x, y)| f.xor_gate(Lit::pos(x), Lit::pos(y)))
        .collect();
    f.or_gate(&xors)
}

/// Reads the level of every feature of one copy from a full assignment.
pub fn decode_levels(assignment: &[bool], vars: &[FeatureVars], levels: &[u64]) -> Result<Vec<u64>> {
    let value = |v: u32| -> Result<bool> {
        assignment
            .get(v as usize)
            .copied()
            .ok_or_else(|| Error::Decode(format!("assignment does not cover variable {v}")))
    };
    vars.iter()
        .zip(levels)
        .enumerate()
        .map(|(i, (fv, &count))| {
            let level = match fv {
                FeatureVars::Constant => 0,
                FeatureVars::Binary(v) => u64::from(value(*v)?),
                FeatureVars::OneHot(vs) => {
                    let mut on = Vec::new();
                    for (k, &v) in vs.iter().enumerate() {
                        if value(v)? {
                            on.push(k as u64);
                        }
                    }
                    match on.as_slice() {
                        [k] => *k,
                        _ => {
                            return Err(Error::Decode(format!(
                                "feature {} has {} active one-hot values",
                                i + 1,
                                on.len()
                            )))
                        }
                    }
                }
                FeatureVars::Bits(vs) => {
                    let mut l = 0u64;
                    for (b, &v) in vs.iter().enumerate() {
                        if value(v)? {
                            l |= 1 << b;
                        }
                    }
                    l
                }
            };
            if level >= count {
                return Err(Error::Decode(format!(
                    "feature {} decodes to level {level} of {count}",
                    i + 1
                )));
            }
            Ok(level)
        })
        .collect()
}

/// Decodes one copy's input variables back into a point of `space`.
pub fn decode<S: Scalar>(assignment: &[bool], f: &Formula, space: &FeatureSpace<S>, copy: CopyTag) -> Result<Vec<S>> {
    let vars = f
        .varmap
        .inputs(copy)
        .ok_or_else(|| Error::Decode(format!("no input variables registered for copy {copy}")))?;
    let counts: Vec<u64> = space.domains().iter().map(|d| d.levels().unwrap_or(0)).collect();
    let levels = decode_levels(assignment, vars, &counts)?;
    Ok(space.point_at(&levels))
}

/// Level interval `[lo, hi]` constraint on one feature.
pub fn restrict_levels(f: &mut Formula, fv: &FeatureVars, levels: u64, lo: u64, hi: u64) -> Result<()> {
    if lo > hi {
        f.add_clause(Vec::new());
        return Ok(());
    }
    match fv {
        FeatureVars::Constant => {}
        FeatureVars::Binary(_) | FeatureVars::OneHot(_) => {
            for l in (0..levels).filter(|l| *l < lo || *l > hi) {
                let lits = level_lits(fv, l);
                f.add_clause(lits.iter().map(|&x| !x).collect());
            }
        }
        FeatureVars::Bits(_) => {
            let e = level_expr(fv);
            if lo > 0 {
                f.add_ge(&e, &rat(lo), false)?;
            }
            if hi + 1 < levels {
                f.add_le(&e, &rat(hi), false)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_domain_bound_and_decode() {
        let space = FeatureSpace::new(vec![Domain::<f64>::Integer { lo: -1, hi: 3 }, Domain::Binary]).unwrap();
        let mut f = Formula::new();
        let vars = ensure_inputs(&mut f, &space, CopyTag::X).unwrap();
        assert!(matches!(&vars[0], FeatureVars::Bits(b) if b.len() == 3));
        assert_eq!(f.pb.len(), 1);
        // level 4 (value 3) is valid, level 5 is not.
        let a = [false, false, false, true, true];
        assert_eq!(decode(&a, &f, &space, CopyTag::X).unwrap(), vec![3.0, 1.0]);
        assert!(f.check(&a));
        let bad = [false, true, false, true, false];
        assert!(!f.check(&bad));
        assert!(matches!(decode(&bad, &f, &space, CopyTag::X), Err(Error::Decode(_))));
    }

    #[test]
    fn one_hot_decode_rejects_two_values() {
        let space = FeatureSpace::new(vec![Domain::Categorical(vec![0.5, 1.5, 4.0])]).unwrap();
        let mut f = Formula::new();
        ensure_inputs(&mut f, &space, CopyTag::X).unwrap();
        assert_eq!(
            decode(&[false, false, true, false], &f, &space, CopyTag::X).unwrap(),
            vec![1.5]
        );
        assert!(matches!(
            decode(&[false, true, true, false], &f, &space, CopyTag::X),
            Err(Error::Decode(_))
        ));
    }

    #[test]
    fn real_interval_is_unsupported() {
        let space = FeatureSpace::new(vec![Domain::Real { lo: 0.0, hi: 1.0 }]).unwrap();
        let mut f = Formula::new();
        assert!(matches!(
            ensure_inputs(&mut f, &space, CopyTag::X),
            Err(Error::EncodingUnsupported(_))
        ));
    }
}
