use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::bnn::Bnn;
use crate::model::space::FeatureSpace;
use crate::scalar::Scalar;

/// Predicted label. `Abstain` exists so queries can exclude rejected inputs;
/// none of the built-in bodies produce it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    Class(usize),
    Abstain,
}

impl ClassLabel {
    pub fn index(self) -> Option<usize> {
        match self {
            ClassLabel::Class(k) => Some(k),
            ClassLabel::Abstain => None,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassLabel::Class(k) => write!(f, "{k}"),
            ClassLabel::Abstain => f.write_str("abstain"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn holds<S: PartialOrd>(self, a: &S, b: &S) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    pub fn parse(s: &str) -> Option<CmpOp> {
        Some(match s {
            "<" => CmpOp::Lt,
            "<=" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            "==" | "=" => CmpOp::Eq,
            "!=" => CmpOp::Ne,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand<S> {
    Const(S),
    Feature(usize),
}

/// `x[feature] op rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom<S> {
    pub feature: usize,
    pub op: CmpOp,
    pub rhs: Operand<S>,
}

impl<S: Scalar> Atom<S> {
    pub fn holds(&self, point: &[S]) -> bool {
        let rhs = match &self.rhs {
            Operand::Const(c) => c,
            Operand::Feature(j) => &point[*j],
        };
        self.op.holds(&point[self.feature], rhs)
    }
}

/// Conjunction of atoms; the empty guard always holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Guard<S> {
    pub atoms: Vec<Atom<S>>,
}

impl<S: Scalar> Guard<S> {
    pub fn always() -> Self {
        Guard { atoms: Vec::new() }
    }

    pub fn holds(&self, point: &[S]) -> bool {
        self.atoms.iter().all(|a| a.holds(point))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch<S> {
    pub guard: Guard<S>,
    pub body: Body<S>,
}

/// Explicit table over a discrete space with a default label for unlisted
/// points.
#[derive(Debug, Clone, PartialEq)]
pub struct Lookup<S> {
    entries: Vec<(Vec<S>, usize)>,
    default: usize,
    index: HashMap<Vec<u64>, usize>,
}

impl<S: Scalar> Lookup<S> {
    pub fn new(space: &FeatureSpace<S>, entries: Vec<(Vec<S>, usize)>, default: usize) -> Result<Self> {
        if !space.is_discrete() {
            return Err(Error::InvalidModel(
                "lookup tables need an all-discrete feature space".into(),
            ));
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (point, label) in &entries {
            let levels = space.levels_of(point)?;
            if index.insert(levels, *label).is_some() {
                return Err(Error::InvalidModel(format!(
                    "duplicate lookup entry for point {point:?}"
                )));
            }
        }
        Ok(Lookup {
            entries,
            default,
            index,
        })
    }

    pub fn entries(&self) -> &[(Vec<S>, usize)] {
        &self.entries
    }

    pub fn default_label(&self) -> usize {
        self.default
    }

    pub fn label_of_levels(&self, levels: &[u64]) -> usize {
        self.index.get(levels).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body<S> {
    Constant(usize),
    /// Class 1 iff `w·x - b >= 0`, class 0 otherwise.
    Linear {
        weights: Vec<S>,
        bias: S,
    },
    /// First branch whose guard holds decides.
    Piecewise(Vec<Branch<S>>),
    Bnn(Bnn),
    Lookup(Lookup<S>),
}

impl<S: Scalar> Body<S> {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Body::Constant(_) => "constant",
            Body::Linear { .. } => "linear",
            Body::Piecewise(_) => "piecewise",
            Body::Bnn(_) => "bnn",
            Body::Lookup(_) => "lookup",
        }
    }

    fn validate(&self, space: &FeatureSpace<S>, classes: usize) -> Result<()> {
        let m = space.dim();
        match self {
            Body::Constant(k) if *k >= classes => Err(Error::InvalidModel(format!(
                "constant label {k} outside {classes} classes"
            ))),
            Body::Constant(_) => Ok(()),
            Body::Linear { weights, .. } => {
                if weights.len() != m {
                    return Err(Error::InvalidModel(format!(
                        "linear body has {} weights for {m} features",
                        weights.len()
                    )));
                }
                if classes != 2 {
                    return Err(Error::InvalidModel("linear bodies are binary classifiers".into()));
                }
                Ok(())
            }
            Body::Piecewise(branches) => {
                if branches.is_empty() {
                    return Err(Error::InvalidModel("piecewise body without branches".into()));
                }
                for b in branches {
                    for a in &b.guard.atoms {
                        let rhs_ok = match a.rhs {
                            Operand::Feature(j) => j < m,
                            Operand::Const(_) => true,
                        };
                        if a.feature >= m || !rhs_ok {
                            return Err(Error::InvalidModel("guard references an unknown feature".into()));
                        }
                    }
                    b.body.validate(space, classes)?;
                }
                if !branches.last().unwrap().guard.atoms.is_empty() {
                    return Err(Error::InvalidModel(
                        "the last piecewise branch must be unconditional so guards cover the space".into(),
                    ));
                }
                Ok(())
            }
            Body::Bnn(bnn) => {
                if !space.is_discrete() {
                    return Err(Error::InvalidModel("BNN inputs must be discrete or quantized".into()));
                }
                bnn.validate(m, classes)
            }
            Body::Lookup(t) => {
                if t.default >= classes || t.entries.iter().any(|(_, l)| *l >= classes) {
                    return Err(Error::InvalidModel("lookup label outside the class set".into()));
                }
                Ok(())
            }
        }
    }

    fn eval(&self, space: &FeatureSpace<S>, point: &[S]) -> Result<ClassLabel> {
        Ok(match self {
            Body::Constant(k) => ClassLabel::Class(*k),
            Body::Linear { weights, bias } => {
                let score = linear_score(weights, bias, point);
                ClassLabel::Class(usize::from(score >= S::zero()))
            }
            Body::Piecewise(branches) => {
                let b = branches
                    .iter()
                    .find(|b| b.guard.holds(point))
                    .expect("last branch is unconditional");
                return b.body.eval(space, point);
            }
            Body::Bnn(bnn) => {
                let levels = space.levels_of(point)?;
                let input: Vec<i64> = levels.iter().map(|&l| l as i64).collect();
                ClassLabel::Class(bnn.forward(&input))
            }
            Body::Lookup(t) => ClassLabel::Class(t.label_of_levels(&space.levels_of(point)?)),
        })
    }

    fn convert<T: Scalar>(&self, space: &FeatureSpace<T>) -> Result<Body<T>> {
        let c = |x: &S| T::from_rational(&x.to_rational());
        Ok(match self {
            Body::Constant(k) => Body::Constant(*k),
            Body::Linear { weights, bias } => Body::Linear {
                weights: weights.iter().map(c).collect(),
                bias: c(bias),
            },
            Body::Piecewise(branches) => Body::Piecewise(
                branches
                    .iter()
                    .map(|b| {
                        let atoms = b
                            .guard
                            .atoms
                            .iter()
                            .map(|a| Atom {
                                feature: a.feature,
                                op: a.op,
                                rhs: match &a.rhs {
                                    Operand::Const(v) => Operand::Const(c(v)),
                                    Operand::Feature(j) => Operand::Feature(*j),
                                },
                            })
                            .collect();
                        Ok(Branch {
                            guard: Guard { atoms },
                            body: b.body.convert(space)?,
                        })
                    })
                    .collect::<Result<_>>()?,
            ),
            Body::Bnn(b) => Body::Bnn(b.clone()),
            Body::Lookup(t) => Body::Lookup(Lookup::new(
                space,
                t.entries.iter().map(|(p, l)| (p.iter().map(c).collect(), *l)).collect(),
                t.default,
            )?),
        })
    }

    /// True when the body only uses linear pieces and constants.
    pub fn is_piecewise_linear(&self) -> bool {
        match self {
            Body::Constant(_) | Body::Linear { .. } => true,
            Body::Piecewise(bs) => bs.iter().all(|b| b.body.is_piecewise_linear()),
            Body::Bnn(_) | Body::Lookup(_) => false,
        }
    }
}

pub fn linear_score<S: Scalar>(weights: &[S], bias: &S, point: &[S]) -> S {
    weights
        .iter()
        .zip(point)
        .fold(S::zero(), |acc, (w, x)| acc + w.clone() * x.clone())
        - bias.clone()
}

/// A decision function over a feature space. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier<S> {
    space: FeatureSpace<S>,
    classes: Vec<String>,
    body: Body<S>,
}

impl<S: Scalar> Classifier<S> {
    pub fn new(space: FeatureSpace<S>, classes: Vec<String>, body: Body<S>) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::InvalidModel("a classifier needs at least two classes".into()));
        }
        body.validate(&space, classes.len())?;
        Ok(Classifier { space, classes, body })
    }

    /// Classes named `0..k`.
    pub fn with_class_count(space: FeatureSpace<S>, k: usize, body: Body<S>) -> Result<Self> {
        Self::new(space, (0..k).map(|i| i.to_string()).collect(), body)
    }

    pub fn space(&self) -> &FeatureSpace<S> {
        &self.space
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn body(&self) -> &Body<S> {
        &self.body
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn evaluate(&self, point: &[S]) -> Result<ClassLabel> {
        self.space.check_point(point)?;
        self.body.eval(&self.space, point)
    }

    /// Raw linear score `w·x - b`; only linear bodies have one.
    pub fn score(&self, point: &[S]) -> Result<S> {
        match &self.body {
            Body::Linear { weights, bias } => {
                self.space.check_point(point)?;
                Ok(linear_score(weights, bias, point))
            }
            other => Err(Error::NotApplicable(format!(
                "{} bodies expose no real-valued score",
                other.kind_name()
            ))),
        }
    }

    /// Same model over another scalar type. Parameters pass through exact
    /// rationals, so converting to [`BigRational`](num_rational::BigRational)
    /// is lossless.
    pub fn convert<T: Scalar>(&self) -> Result<Classifier<T>> {
        let space = self.space.convert()?;
        let body = self.body.convert(&space)?;
        Classifier::new(space, self.classes.clone(), body)
    }

    /// Same model with every continuous feature put on a grid of `step`.
    pub fn quantized(&self, step: &S) -> Result<Self> {
        let space = self.space.quantized(step)?;
        Classifier::new(space, self.classes.clone(), self.body.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance<S> {
    pub point: Vec<S>,
    pub label: ClassLabel,
}

impl<S: Scalar> Instance<S> {
    pub fn new(point: Vec<S>, label: ClassLabel) -> Self {
        Instance { point, label }
    }
}

/// A classifier paired with an instance it actually predicts.
#[derive(Debug, Clone)]
pub struct ExplanationProblem<'a, S> {
    classifier: &'a Classifier<S>,
    instance: Instance<S>,
}

impl<'a, S: Scalar> ExplanationProblem<'a, S> {
    pub fn new(classifier: &'a Classifier<S>, instance: Instance<S>) -> Result<Self> {
        let predicted = classifier.evaluate(&instance.point)?;
        if predicted != instance.label {
            return Err(Error::Precondition(format!(
                "instance label {} differs from the prediction {}",
                instance.label, predicted
            )));
        }
        Ok(ExplanationProblem { classifier, instance })
    }

    /// Builds the problem for `point` with its predicted label.
    pub fn predicted(classifier: &'a Classifier<S>, point: Vec<S>) -> Result<Self> {
        let label = classifier.evaluate(&point)?;
        Ok(ExplanationProblem {
            classifier,
            instance: Instance { point, label },
        })
    }

    pub fn classifier(&self) -> &'a Classifier<S> {
        self.classifier
    }

    pub fn instance(&self) -> &Instance<S> {
        &self.instance
    }

    pub fn point(&self) -> &[S] {
        &self.instance.point
    }

    pub fn label(&self) -> ClassLabel {
        self.instance.label
    }

    pub fn dim(&self) -> usize {
        self.classifier.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{build_kappa1, build_kappa2};
    use crate::model::space::Domain;

    #[test]
    fn kappa1_training_pairs() {
        let k1 = build_kappa1::<f64>();
        assert_eq!(k1.evaluate(&[1.0]).unwrap(), ClassLabel::Class(1));
        assert_eq!(k1.evaluate(&[0.0]).unwrap(), ClassLabel::Class(0));
        for (x, c) in crate::model::fixtures::kappa1_training_data::<f64>() {
            assert_eq!(k1.evaluate(&[x]).unwrap(), ClassLabel::Class(c));
        }
    }

    #[test]
    fn kappa2_branches() {
        let k2 = build_kappa2::<f64>();
        assert_eq!(k2.evaluate(&[2.0, 1.0]).unwrap(), ClassLabel::Class(1));
        assert_eq!(k2.evaluate(&[1.5, 1.8]).unwrap(), ClassLabel::Class(0));
        assert_eq!(k2.evaluate(&[0.0, 1.0]).unwrap(), ClassLabel::Class(0));
        assert_eq!(k2.evaluate(&[0.7, 1.0]).unwrap(), ClassLabel::Class(1));
    }

    #[test]
    fn linear_boundary_is_non_strict() {
        let space = FeatureSpace::new(vec![Domain::Real { lo: -1.0, hi: 1.0 }]).unwrap();
        let c = Classifier::with_class_count(
            space,
            2,
            Body::Linear {
                weights: vec![2.0],
                bias: 1.0,
            },
        )
        .unwrap();
        assert_eq!(c.evaluate(&[0.5]).unwrap(), ClassLabel::Class(1));
        assert_eq!(c.evaluate(&[0.49]).unwrap(), ClassLabel::Class(0));
    }

    #[test]
    fn out_of_domain_point_is_an_error() {
        let k1 = build_kappa1::<f64>();
        assert!(matches!(k1.evaluate(&[3.0]), Err(Error::Domain(_))));
        assert!(matches!(k1.evaluate(&[0.1, 0.2]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn problem_rejects_wrong_label() {
        let k1 = build_kappa1::<f64>();
        assert!(ExplanationProblem::new(&k1, Instance::new(vec![0.7], ClassLabel::Class(0))).is_err());
        assert!(ExplanationProblem::new(&k1, Instance::new(vec![0.7], ClassLabel::Class(1))).is_ok());
    }

    #[test]
    fn malformed_bodies_rejected() {
        let space = FeatureSpace::new(vec![Domain::<f64>::Binary; 2]).unwrap();
        assert!(Classifier::with_class_count(
            space.clone(),
            2,
            Body::Linear {
                weights: vec![1.0],
                bias: 0.0
            }
        )
        .is_err());
        assert!(Classifier::with_class_count(space.clone(), 2, Body::Constant(2)).is_err());
        assert!(Classifier::with_class_count(space.clone(), 1, Body::Constant(0)).is_err());
        let uncovered = Body::Piecewise(vec![Branch {
            guard: Guard {
                atoms: vec![Atom {
                    feature: 0,
                    op: CmpOp::Le,
                    rhs: Operand::Const(0.5),
                }],
            },
            body: Body::Constant(0),
        }]);
        assert!(Classifier::with_class_count(space, 2, uncovered).is_err());
    }

    #[test]
    fn lookup_default_and_entries() {
        let space = FeatureSpace::new(vec![Domain::<f64>::Binary; 3]).unwrap();
        let t = Lookup::new(&space, vec![(vec![1.0, 0.0, 1.0], 1)], 0).unwrap();
        let c = Classifier::with_class_count(space.clone(), 2, Body::Lookup(t)).unwrap();
        assert_eq!(c.evaluate(&[1.0, 0.0, 1.0]).unwrap(), ClassLabel::Class(1));
        assert_eq!(c.evaluate(&[1.0, 1.0, 1.0]).unwrap(), ClassLabel::Class(0));
        assert!(Lookup::new(&space, vec![(vec![1.0, 0.0, 1.0], 1), (vec![1.0, 0.0, 1.0], 0)], 0).is_err());
    }
}
