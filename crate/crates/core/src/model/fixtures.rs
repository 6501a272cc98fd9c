//! The two small running-example classifiers, shipped so their documented
//! behavior can be exercised directly.

use crate::model::classifier::{Atom, Body, Branch, Classifier, CmpOp, Guard, Operand};
use crate::model::space::{Domain, FeatureSpace};
use crate::scalar::Scalar;

pub const KAPPA1_WEIGHT: &str = "0.93198992";
pub const KAPPA1_BIAS: &str = "0.64735516";

fn num<S: Scalar>(text: &str) -> S {
    S::parse_decimal(text).expect("fixture constant parses")
}

/// Single-feature linear model over `[0, 1]`:
/// class 1 iff `0.93198992·x1 - 0.64735516 >= 0`.
pub fn build_kappa1<S: Scalar>() -> Classifier<S> {
    let space = FeatureSpace::new(vec![Domain::Real {
        lo: S::zero(),
        hi: S::one(),
    }])
    .unwrap();
    Classifier::with_class_count(
        space,
        2,
        Body::Linear {
            weights: vec![num(KAPPA1_WEIGHT)],
            bias: num(KAPPA1_BIAS),
        },
    )
    .unwrap()
}

/// Training data `κ1` fits with full accuracy.
pub fn kappa1_training_data<S: Scalar>() -> Vec<(S, usize)> {
    [("0.0", 0), ("0.3", 0), ("0.4", 0), ("0.7", 1), ("1.0", 1)]
        .into_iter()
        .map(|(x, c)| (num(x), c))
        .collect()
}

/// Two-feature model over `[-2, 2]²`: `κ1(x1)` when `x1 <= 1`,
/// otherwise class 1 iff `x1 > x2`.
pub fn build_kappa2<S: Scalar>() -> Classifier<S> {
    let two = S::from_i64_exact(2);
    let dom = Domain::Real {
        lo: -two.clone(),
        hi: two,
    };
    let space = FeatureSpace::new(vec![dom.clone(), dom]).unwrap();
    let body = Body::Piecewise(vec![
        Branch {
            guard: Guard {
                atoms: vec![Atom {
                    feature: 0,
                    op: CmpOp::Le,
                    rhs: Operand::Const(S::one()),
                }],
            },
            body: Body::Linear {
                weights: vec![num(KAPPA1_WEIGHT), S::zero()],
                bias: num(KAPPA1_BIAS),
            },
        },
        Branch {
            guard: Guard {
                atoms: vec![Atom {
                    feature: 0,
                    op: CmpOp::Gt,
                    rhs: Operand::Feature(1),
                }],
            },
            body: Body::Constant(1),
        },
        Branch {
            guard: Guard::always(),
            body: Body::Constant(0),
        },
    ]);
    Classifier::with_class_count(space, 2, body).unwrap()
}
