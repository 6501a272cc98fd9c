use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::formula::{CopyTag, FeatureVars, Formula, LinExpr, Lit, PBConstraint, VarRole};
use super::inputs::{ensure_inputs, level_expr, level_lits, value_expr};
use crate::error::{Error, Result};
use crate::model::{Atom, Bnn, Body, Classifier, CmpOp, FeatureSpace, Lookup, Operand};
use crate::scalar::Scalar;

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Encodes `classifier` over the input variables of `copy` and returns one
/// indicator per class. Exactly one indicator holds in every model, and it
/// is the class the evaluator assigns to the decoded point.
pub fn encode_classifier<S: Scalar>(f: &mut Formula, classifier: &Classifier<S>, copy: CopyTag) -> Result<Vec<Lit>> {
    if let Some(existing) = f.varmap.classes(copy) {
        return Ok(existing.to_vec());
    }
    let space = classifier.space();
    let inputs = ensure_inputs(f, space, copy).map_err(|e| match e {
        Error::EncodingUnsupported(msg) => Error::EncodingUnsupported(format!(
            "{} body over continuous features: {msg}",
            classifier.body().kind_name()
        )),
        other => other,
    })?;
    let k = classifier.num_classes();
    let ind = encode_body(f, classifier.body(), space, &inputs, k)?;
    let mut classes = Vec::with_capacity(k);
    for (c, &l) in ind.iter().enumerate() {
        let v = Lit::pos(f.new_var(VarRole::Class { copy, class: c }));
        f.add_clause(vec![!v, l]);
        f.add_clause(vec![v, !l]);
        classes.push(v);
    }
    f.add_pb(PBConstraint::exactly(&classes, 1));
    f.varmap.set_classes(copy, classes.clone());
    Ok(classes)
}

fn encode_body<S: Scalar>(
    f: &mut Formula,
    body: &Body<S>,
    space: &FeatureSpace<S>,
    inputs: &[FeatureVars],
    k: usize,
) -> Result<Vec<Lit>> {
    match body {
        Body::Constant(c) => {
            let t = f.true_lit();
            Ok((0..k).map(|j| if j == *c { t } else { !t }).collect())
        }
        Body::Linear { weights, bias } => {
            let mut e = LinExpr::constant(-bias.to_rational());
            for (i, w) in weights.iter().enumerate() {
                let w = w.to_rational();
                if !w.is_zero() {
                    e.add_scaled(&value_expr(space.domain(i), &inputs[i]), &w);
                }
            }
            let one = f.reify_ge(&e, &BigRational::zero(), false)?;
            Ok(vec![!one, one])
        }
        Body::Piecewise(branches) => {
            let mut out: Vec<Vec<Lit>> = vec![Vec::new(); k];
            let mut earlier: Vec<Lit> = Vec::new();
            for b in branches {
                let mut atoms = Vec::with_capacity(b.guard.atoms.len());
                for a in &b.guard.atoms {
                    atoms.push(encode_atom(f, a, space, inputs)?);
                }
                let guard = f.and_gate(&atoms);
                let mut conds: Vec<Lit> = earlier.iter().map(|&g| !g).collect();
                conds.push(guard);
                let active = f.and_gate(&conds);
                earlier.push(guard);
                let sub = encode_body(f, &b.body, space, inputs, k)?;
                for (j, &s) in sub.iter().enumerate() {
                    let both = f.and_gate(&[active, s]);
                    out[j].push(both);
                }
            }
            Ok(out.iter().map(|lits| f.or_gate(lits)).collect())
        }
        Body::Bnn(bnn) => encode_bnn(f, bnn, inputs),
        Body::Lookup(table) => encode_lookup(f, table, space, inputs, k),
    }
}

fn encode_atom<S: Scalar>(
    f: &mut Formula,
    a: &Atom<S>,
    space: &FeatureSpace<S>,
    inputs: &[FeatureVars],
) -> Result<Lit> {
    let mut e = value_expr(space.domain(a.feature), &inputs[a.feature]);
    let rhs = match &a.rhs {
        Operand::Const(c) => LinExpr::constant(c.to_rational()),
        Operand::Feature(j) => value_expr(space.domain(*j), &inputs[*j]),
    };
    e.add_scaled(&rhs, &int(-1));
    let zero = BigRational::zero();
    Ok(match a.op {
        CmpOp::Le => f.reify_le(&e, &zero, false)?,
        CmpOp::Lt => f.reify_le(&e, &zero, true)?,
        CmpOp::Ge => f.reify_ge(&e, &zero, false)?,
        CmpOp::Gt => f.reify_ge(&e, &zero, true)?,
        CmpOp::Eq => f.reify_eq(&e, &zero)?,
        CmpOp::Ne => !f.reify_eq(&e, &zero)?,
    })
}

fn encode_bnn(f: &mut Formula, bnn: &Bnn, inputs: &[FeatureVars]) -> Result<Vec<Lit>> {
    // Each entry is the integer expression feeding the next layer.
    let mut layer: Vec<LinExpr> = inputs.iter().map(level_expr).collect();
    for block in &bnn.blocks {
        let mut next = Vec::with_capacity(block.weights.len());
        for (row, &t) in block.weights.iter().zip(&block.thresholds) {
            let mut s = LinExpr::default();
            for (&w, x) in row.iter().zip(&layer) {
                s.add_scaled(x, &int(w as i64));
            }
            let h = f.reify_ge(&s, &int(t), false)?;
            // activation 2h - 1 ∈ {-1, +1}
            let mut act = LinExpr::constant(int(-1));
            act.add_term(int(2), h);
            next.push(act);
        }
        layer = next;
    }
    let scores: Vec<LinExpr> = bnn
        .output
        .weights
        .iter()
        .zip(&bnn.output.bias)
        .map(|(row, &b)| {
            let mut s = LinExpr::constant(int(b));
            for (&w, x) in row.iter().zip(&layer) {
                s.add_scaled(x, &int(w as i64));
            }
            s
        })
        .collect();
    let k = scores.len();
    let mut ind = Vec::with_capacity(k);
    for c in 0..k {
        let mut wins = Vec::with_capacity(k - 1);
        for j in (0..k).filter(|&j| j != c) {
            let mut d = scores[c].clone();
            d.add_scaled(&scores[j], &int(-1));
            // ties go to the lower index
            wins.push(f.reify_ge(&d, &BigRational::zero(), j < c)?);
        }
        ind.push(f.and_gate(&wins));
    }
    Ok(ind)
}

fn encode_lookup<S: Scalar>(
    f: &mut Formula,
    table: &Lookup<S>,
    space: &FeatureSpace<S>,
    inputs: &[FeatureVars],
    k: usize,
) -> Result<Vec<Lit>> {
    let mut by_label: Vec<Vec<Lit>> = vec![Vec::new(); k];
    let mut all = Vec::with_capacity(table.entries().len());
    for (point, label) in table.entries() {
        let levels = space.levels_of(point)?;
        let lits: Vec<Lit> = inputs
            .iter()
            .zip(&levels)
            .flat_map(|(fv, &l)| level_lits(fv, l))
            .collect();
        let hit = f.and_gate(&lits);
        all.push(hit);
        if *label != table.default_label() {
            by_label[*label].push(hit);
        }
    }
    let any = f.or_gate(&all);
    let mut ind = Vec::with_capacity(k);
    for (j, lits) in by_label.iter_mut().enumerate() {
        if j == table.default_label() {
            // default label: matched an entry with this label, or nothing
            let explicit: Vec<Lit> = table
                .entries()
                .iter()
                .zip(&all)
                .filter(|((_, l), _)| *l == j)
                .map(|(_, &h)| h)
                .collect();
            let own = f.or_gate(&explicit);
            ind.push(f.or_gate(&[own, !any]));
        } else {
            ind.push(f.or_gate(lits));
        }
    }
    Ok(ind)
}
